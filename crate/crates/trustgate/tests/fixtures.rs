use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use trustgate::harness::batch::{generate_batch, load_batch};
use trustgate::harness::fixtures::generate_fixtures;
use trustgate::harness::{Layout, Scenario};

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn same_seed_gives_identical_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    generate_fixtures(3, &a).unwrap();
    generate_fixtures(3, &b).unwrap();
    generate_fixtures(4, &c).unwrap();
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    assert_eq!(ta, tb);
    assert_ne!(ta.get(Path::new("registry.json")), tc.get(Path::new("registry.json")));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tc.keys().collect::<Vec<_>>());
}

#[test]
fn fixtures_cover_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let summary = generate_fixtures(3, dir.path()).unwrap();
    let layout = Layout::new(dir.path());
    for tag in Scenario::ALL {
        assert!(summary.cases[&tag] > 0, "{tag:?}");
        assert!(layout.cases(tag).is_dir());
    }
    assert!(layout.jwks().is_file());
    assert!(layout.ledger().is_file());
}

#[test]
fn same_seed_gives_identical_batch() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let fx = dir.path().join(name).join("fixtures");
        let out = dir.path().join(name).join("batch");
        generate_fixtures(3, &fx).unwrap();
        let manifest = generate_batch(&fx, 11, 60, &out).unwrap();
        assert_eq!(manifest.request_ids.len(), 60);
        // a second run reuses the anchors already in the ledger
        let ledger = fs::read(Layout::new(&fx).ledger()).unwrap();
        generate_batch(&fx, 11, 60, &out).unwrap();
        assert_eq!(fs::read(Layout::new(&fx).ledger()).unwrap(), ledger);
        outputs.push((tree(&out), ledger));
    }
    assert_eq!(outputs[0], outputs[1]);

    let (_, cases) = load_batch(&dir.path().join("a").join("batch")).unwrap();
    assert!(cases.iter().any(|c| c.anchored));
    assert!(cases.iter().all(|c| c.depth <= 3 && (!c.anchored || c.depth > 0)));
    for depth in 0..=3 {
        assert!(cases.iter().any(|c| c.depth == depth), "depth {depth}");
    }
}
