//! Pattern CSV and window sidecar files.
//!
//! Pattern CSV columns: `subject_id,sample_id,group,tree_id,point_type,x,y`,
//! with `point_type` one of `base` or `end`. The window for a pattern file
//! `foo.csv` is read from `foo.window.json` when present.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_data, Error, Result};
use crate::geometry::{Point, Window};
use crate::sample::{Group, NerveSample, NerveTree, SampleSet};

pub const PATTERN_HEADER: [&str; 7] = [
    "subject_id",
    "sample_id",
    "group",
    "tree_id",
    "point_type",
    "x",
    "y",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFile {
    pub window: Window,
}

pub fn window_sidecar_path(pattern_csv: &Path) -> PathBuf {
    pattern_csv.with_extension("window.json")
}

pub fn read_window_json(path: &Path) -> Result<Window> {
    let wf: WindowFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    wf.window.validate()?;
    Ok(wf.window)
}

pub fn write_window_json(path: &Path, window: &Window) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer(&mut f, &WindowFile { window: *window })?;
    writeln!(f)?;
    Ok(())
}

/// Loads a pattern CSV using its window sidecar, or the default window.
pub fn load_sample_set(path: &Path) -> Result<SampleSet> {
    let sidecar = window_sidecar_path(path);
    let window = if sidecar.exists() {
        read_window_json(&sidecar)?
    } else {
        Window::default()
    };
    load_sample_set_with_window(path, window)
}

struct PendingTree {
    tree_id: u64,
    base: Option<Point>,
    ends: Vec<Point>,
}

struct PendingSample {
    subject_id: String,
    sample_id: String,
    group: Group,
    trees: Vec<PendingTree>,
    tree_index: HashMap<u64, usize>,
}

pub fn load_sample_set_with_window(path: &Path, window: Window) -> Result<SampleSet> {
    let file = File::open(path)?;
    read_sample_set(BufReader::new(file), window, &path.display().to_string())
}

pub fn read_sample_set<R: std::io::Read>(input: R, window: Window, label: &str) -> Result<SampleSet> {
    window.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PATTERN_HEADER {
        return Err(Error::Parse {
            path: label.into(),
            line: 1,
            message: format!("expected header '{}'", PATTERN_HEADER.join(",")),
        });
    }

    let mut samples: Vec<PendingSample> = Vec::new();
    let mut sample_index: HashMap<(String, String), usize> = HashMap::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let perr = |message: String| Error::Parse {
            path: label.into(),
            line,
            message,
        };
        if rec.len() != 7 {
            return Err(perr(format!("expected 7 fields, found {}", rec.len())));
        }
        let subject_id = rec[0].to_string();
        let sample_id = rec[1].to_string();
        let group: Group = rec[2].parse().map_err(|e: Error| perr(e.to_string()))?;
        let tree_id: u64 = rec[3]
            .parse()
            .map_err(|e| perr(format!("tree_id '{}': {e}", &rec[3])))?;
        let x: f64 = rec[5]
            .parse()
            .map_err(|e| perr(format!("x '{}': {e}", &rec[5])))?;
        let y: f64 = rec[6]
            .parse()
            .map_err(|e| perr(format!("y '{}': {e}", &rec[6])))?;
        let p = Point::new(x, y);
        if !p.is_finite() {
            return Err(perr("non-finite coordinate".into()));
        }
        if !window.contains(&p) {
            return Err(perr(format!(
                "point ({x}, {y}) of sample {sample_id}, tree {tree_id} lies outside window \
                 [{}, {}] x [{}, {}]",
                window.xmin, window.xmax, window.ymin, window.ymax
            )));
        }

        let key = (subject_id.clone(), sample_id.clone());
        let si = *sample_index.entry(key).or_insert_with(|| {
            samples.push(PendingSample {
                subject_id,
                sample_id: sample_id.clone(),
                group,
                trees: Vec::new(),
                tree_index: HashMap::new(),
            });
            samples.len() - 1
        });
        let s = &mut samples[si];
        if s.group != group {
            return Err(perr(format!(
                "sample {} listed under groups {} and {}",
                s.sample_id, s.group, group
            )));
        }
        let ti = *s.tree_index.entry(tree_id).or_insert_with(|| {
            s.trees.push(PendingTree {
                tree_id,
                base: None,
                ends: Vec::new(),
            });
            s.trees.len() - 1
        });
        let tree = &mut s.trees[ti];
        match &rec[4] {
            "base" => {
                if tree.base.replace(p).is_some() {
                    return Err(perr(format!(
                        "second base row for tree {tree_id} in sample {}",
                        s.sample_id
                    )));
                }
            }
            "end" => tree.ends.push(p),
            "branch" => {
                return Err(perr(
                    "branch points are not supported; remove point_type=branch rows".into(),
                ))
            }
            other => return Err(perr(format!("unknown point_type '{other}'"))),
        }
    }

    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let mut trees = Vec::with_capacity(s.trees.len());
        for t in s.trees {
            let base = t.base.ok_or_else(|| {
                invalid_data(format!(
                    "{label}: tree {} of sample {} has no base row",
                    t.tree_id, s.sample_id
                ))
            })?;
            trees.push(NerveTree::new(t.tree_id, base, t.ends));
        }
        out.push(NerveSample::new(s.sample_id, s.subject_id, s.group, trees, window)?);
    }
    SampleSet::new(out)
}

pub fn write_sample_set<W: Write>(set: &SampleSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATTERN_HEADER)?;
    for s in set.samples() {
        for t in s.trees() {
            let id = t.tree_id.to_string();
            let mut row = |kind: &str, p: &Point| {
                w.write_record([
                    s.subject_id.as_str(),
                    s.sample_id.as_str(),
                    s.group.as_str(),
                    id.as_str(),
                    kind,
                    &p.x.to_string(),
                    &p.y.to_string(),
                ])
            };
            row("base", &t.base)?;
            for e in &t.ends {
                row("end", e)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the pattern CSV and, when all samples share one window, its sidecar.
pub fn save_sample_set(set: &SampleSet, path: &Path) -> Result<()> {
    write_sample_set(set, File::create(path)?)?;
    if let Some(first) = set.samples().first() {
        if set.samples().iter().any(|s| s.window() != first.window()) {
            return Err(invalid_data(
                "samples with different windows cannot share one pattern file",
            ));
        }
        write_window_json(&window_sidecar_path(path), first.window())?;
    }
    Ok(())
}

/// Loads every `*.csv` in `dir` (sorted by file name) into one set.
pub fn load_sample_dir(dir: &Path) -> Result<SampleSet> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut all = Vec::new();
    for f in files {
        all.extend(load_sample_set(&f)?.into_samples());
    }
    SampleSet::new(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject_id,sample_id,group,tree_id,point_type,x,y\n";

    fn read(body: &str) -> Result<SampleSet> {
        read_sample_set(
            format!("{HEADER}{body}").as_bytes(),
            Window::default(),
            "test.csv",
        )
    }

    #[test]
    fn one_tree_two_ends() {
        let set = read("p1,s1,healthy,7,base,10,20\np1,s1,healthy,7,end,11,21\np1,s1,healthy,7,end,12.5,19\n")
            .unwrap();
        assert_eq!(set.len(), 1);
        let s = &set.samples()[0];
        assert_eq!(s.n_trees(), 1);
        assert_eq!(s.trees()[0].ends.len(), 2);
        assert_eq!(s.trees()[0].base, Point::new(10.0, 20.0));
    }

    #[test]
    fn empty_body() {
        assert!(read("").unwrap().is_empty());
    }

    #[test]
    fn point_outside_window_names_row() {
        let err = read("p1,s1,healthy,1,base,10,10\np1,s1,healthy,1,end,500,10\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("500"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_branch_points_and_missing_base() {
        let err = read("p1,s1,healthy,1,branch,10,10\n").unwrap_err();
        assert!(err.to_string().contains("branch"));
        assert!(read("p1,s1,healthy,1,end,10,10\n").is_err());
        assert!(read("p1,s1,healthy,1,base,10,10\np1,s1,healthy,1,base,11,10\n").is_err());
        assert!(read("p1,s1,healthy,x,base,10,10\n").is_err());
    }

    #[test]
    fn bad_header() {
        let r = read_sample_set("a,b\n".as_bytes(), Window::default(), "t");
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }
}
