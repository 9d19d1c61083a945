use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use xorgd::lab::{check, decision_boundary_grid, load_manifest, load_summary, preset, run, ExperimentConfig};
use xorgd::NetworkParams;

fn small_theorem() -> ExperimentConfig {
    let mut cfg = preset("theorem").unwrap();
    for s in ["distribution.d=40", "n_train=200", "m=16", "n_test=1000", "seeds=[1,2]", "outputs.dataset=true"] {
        cfg.apply_override(s).unwrap();
    }
    cfg
}

fn small_plane() -> ExperimentConfig {
    let mut cfg = preset("fig1").unwrap();
    for s in ["n_train=200", "m=20", "train.iterations=30", "n_test=500", "outputs.grid_resolution=30"] {
        cfg.apply_override(s).unwrap();
    }
    cfg
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn reruns_write_identical_files() {
    for cfg in [small_theorem(), small_plane()] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(&cfg, a.path()).unwrap();
        run(&cfg, b.path()).unwrap();
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
        for (name, bytes) in &fa {
            if name != "manifest.json" {
                assert!(bytes == &fb[name], "{} differs in {name}", cfg.name);
            }
        }
        assert!(fa.contains_key("seed_1/trace.csv") && fa.contains_key("seed_1/diagnostics.json"));
    }
}

#[test]
fn manifest_alone_reproduces_the_summary() {
    let first = tempfile::tempdir().unwrap();
    let art = run(&small_theorem(), first.path()).unwrap();
    let manifest = load_manifest(first.path()).unwrap();
    let second = tempfile::tempdir().unwrap();
    run(&manifest.config, second.path()).unwrap();
    assert_eq!(
        fs::read(first.path().join("summary.json")).unwrap(),
        fs::read(second.path().join("summary.json")).unwrap()
    );
    assert_eq!(load_summary(second.path()).unwrap(), art.summary);
}

#[test]
fn check_reproduces_recorded_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let art = run(&small_theorem(), dir.path()).unwrap();
    assert_eq!(check(dir.path()).unwrap(), art.summary.predicates);
}

#[test]
fn svg_regions_match_grid_signs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_plane();
    let art = run(&cfg, dir.path()).unwrap();
    let seed = &art.seeds[0];
    let res = cfg.outputs.grid_resolution;

    let mut csv_signs = vec![0i8; res * res];
    let text = fs::read_to_string(seed.grid_csv.as_ref().unwrap()).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        csv_signs[k] = line.rsplit(',').next().unwrap().parse().unwrap();
    }
    assert_eq!(text.lines().count(), res * res + 1);

    let svg = fs::read_to_string(seed.boundary_svg.as_ref().unwrap()).unwrap();
    let attr = |tag: &str, name: &str| -> String {
        let start = tag.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        tag[start..].split('"').next().unwrap().to_string()
    };
    let mut covered = vec![0u32; res * res];
    for tag in svg.split("<rect").skip(1) {
        let x: usize = attr(tag, "x").parse().unwrap();
        let y: usize = attr(tag, "y").parse().unwrap();
        let w: usize = attr(tag, "width").parse().unwrap();
        let sign: i8 = attr(tag, "data-sign").parse().unwrap();
        let fill = attr(tag, "fill");
        let row = res - 1 - y;
        for col in x..x + w {
            assert_eq!(csv_signs[row * res + col], sign, "cell ({row},{col})");
            covered[row * res + col] += 1;
        }
        assert_eq!(fill, xorgd::lab::region_color(sign));
    }
    assert!(covered.iter().all(|c| *c == 1));

    let (params, _) = NetworkParams::load_checkpoint(seed.checkpoint.as_ref().unwrap()).unwrap();
    let grid = decision_boundary_grid(&params, cfg.outputs.grid_bounds, res).unwrap();
    assert_eq!(grid.signs, csv_signs);
}
