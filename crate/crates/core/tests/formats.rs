use std::path::{Path, PathBuf};

use privloc::dataio::{
    read_descriptors, read_labelmap, read_matches, read_palette, read_results, read_scene, write_descriptors,
    write_labelmap, write_matches, write_palette, write_results, write_scene, DataError,
};
use privloc::pipeline::GlobalDescriptor;
use privloc::raster::LabelMap;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn assert_same_bytes(a: &Path, b: &Path) {
    assert_eq!(
        std::fs::read(a).unwrap(),
        std::fs::read(b).unwrap(),
        "{} vs {}",
        a.display(),
        b.display()
    );
}

#[test]
fn scene_fixture_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let db = read_scene(&fixture("scene.txt")).unwrap();
    assert_eq!(db.len(), 3);
    let b = db.get("cam_b").unwrap();
    assert!(b.raster.is_none());
    assert_eq!(b.labelmap.as_deref(), Some(Path::new("labels/cam_b.png")));
    let out = dir.path().join("scene.txt");
    write_scene(&db, &out).unwrap();
    assert_same_bytes(&fixture("scene.txt"), &out);
}

#[test]
fn matches_fixture_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let sets = read_matches(&fixture("matches.txt"), None).unwrap();
    assert_eq!(sets.iter().map(|s| s.len()).collect::<Vec<_>>(), [3, 0, 1]);
    let out = dir.path().join("matches.txt");
    write_matches(&sets, &out).unwrap();
    assert_same_bytes(&fixture("matches.txt"), &out);
}

#[test]
fn matches_fixture_fits_the_scene() {
    let db = read_scene(&fixture("scene.txt")).unwrap();
    let sizes = privloc::dataio::image_sizes([&db]);
    assert!(read_matches(&fixture("matches.txt"), Some(&sizes)).is_ok());
}

#[test]
fn results_and_palette_fixtures_are_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let results = read_results(&fixture("results.csv")).unwrap();
    assert!(results[0].pose.is_some() && results[1].pose.is_none());
    let out = dir.path().join("results.csv");
    write_results(&results, &out).unwrap();
    assert_same_bytes(&fixture("results.csv"), &out);

    let palette = read_palette(&fixture("palette.txt")).unwrap();
    assert_eq!(palette[&7], [10, 20, 30]);
    let out = dir.path().join("palette.txt");
    write_palette(&palette, &out).unwrap();
    assert_same_bytes(&fixture("palette.txt"), &out);
}

#[test]
fn binary_formats_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let descriptors: Vec<GlobalDescriptor> = (0..5)
        .map(|i| {
            let v: Vec<f64> = (0..2048).map(|j| ((i * 2048 + j) as f64 * 0.37).sin()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            GlobalDescriptor::new(format!("img{i}"), v.iter().map(|x| (x / n) as f32).collect())
        })
        .collect();
    let (a, b) = (dir.path().join("a.gdsc"), dir.path().join("b.gdsc"));
    write_descriptors(&descriptors, &a).unwrap();
    let back = read_descriptors(&a).unwrap();
    for (x, y) in descriptors.iter().zip(&back) {
        assert_eq!(x.id, y.id);
        assert!(x.vector.iter().zip(&y.vector).all(|(p, q)| (p - q).abs() <= 1e-7));
    }
    write_descriptors(&back, &b).unwrap();
    assert_same_bytes(&a, &b);

    let labels = LabelMap::from_fn(64, 48, |x, y| (x / 8 + 10 * (y / 12)) * 1000 % 65536);
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    write_labelmap(&labels, &a).unwrap();
    let back = read_labelmap(&a).unwrap();
    assert_eq!(back, labels);
    write_labelmap(&back, &b).unwrap();
    assert_same_bytes(&a, &b);
}

fn read_any(path: &Path) -> Result<(), DataError> {
    let name = path.file_name().unwrap().to_str().unwrap();
    let kind = name.split('_').next().unwrap();
    match kind {
        "scene" => read_scene(path).map(drop),
        "matches" => read_matches(path, None).map(drop),
        "descriptors" => read_descriptors(path).map(drop),
        "results" => read_results(path).map(drop),
        "palette" => read_palette(path).map(drop),
        other => panic!("unknown corpus entry kind '{other}'"),
    }
}

#[test]
fn malformed_corpus_is_rejected_with_positions() {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(fixture("malformed"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    assert!(entries.len() >= 10);
    for path in &entries {
        match read_any(path) {
            Ok(()) => panic!("{} was accepted", path.display()),
            Err(e) => assert!(
                e.position().is_some(),
                "{}: unpositioned error {e}",
                path.display()
            ),
        }
    }
}

#[test]
fn missing_files_are_reported() {
    let e = read_scene(Path::new("/nonexistent/scene.txt")).unwrap_err();
    assert!(matches!(e, DataError::MissingFile { .. }));
}
