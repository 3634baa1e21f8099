use std::fs;
use std::path::Path;

use vesselforge::dataset::{load_dataset, synth_vessels, Layout, SplitManifest, MANIFEST_FILE};
use vesselforge::image::{write_image, ImageBuffer};
use vesselforge::Error;

fn write_pair(dir: &Path, gt_dir: &str, id: &str, seed: u8, gt_value: u8) {
    let img = ImageBuffer::gray_from_fn(12, 10, |x, y| (x as u8 * 7 + y as u8 * 3).wrapping_add(seed));
    let gt = ImageBuffer::gray_from_fn(12, 10, |x, _| if x == 4 { gt_value } else { 0 });
    write_image(dir.join("images").join(format!("{id}.pgm")), &img).unwrap();
    write_image(dir.join(gt_dir).join(format!("{id}.pgm")), &gt).unwrap();
}

fn drive_fixture(root: &Path) {
    for (split, ids) in [("training", ["21", "22"]), ("test", ["01", "02"])] {
        for (k, id) in ids.iter().enumerate() {
            write_pair(&root.join(split), "1st_manual", id, k as u8, 255);
        }
    }
}

fn stare_fixture(root: &Path) {
    for (k, id) in ["im0044", "im0001", "im0139", "im0077"].iter().enumerate() {
        write_pair(root, "labels", id, k as u8, 255);
    }
}

fn ids(samples: &[vesselforge::dataset::Sample]) -> Vec<&str> {
    samples.iter().map(|s| s.id.as_str()).collect()
}

#[test]
fn drive_layout_splits_by_directory() {
    let dir = tempfile::tempdir().unwrap();
    drive_fixture(dir.path());
    let (train, test) = load_dataset(dir.path(), Layout::Drive, None).unwrap();
    assert_eq!(ids(&train), ["21", "22"]);
    assert_eq!(ids(&test), ["01", "02"]);
    assert!(train.iter().chain(&test).all(|s| s.gt_mask.is_binary()));
}

#[test]
fn stare_without_manifest_writes_sorted_half_split() {
    let dir = tempfile::tempdir().unwrap();
    stare_fixture(dir.path());
    let (train, test) = load_dataset(dir.path(), Layout::Stare, None).unwrap();
    assert_eq!(ids(&train), ["im0001", "im0044"]);
    assert_eq!(ids(&test), ["im0077", "im0139"]);
    let m = SplitManifest::read(dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.train, ["im0001", "im0044"]);
    assert_eq!(m.test, ["im0077", "im0139"]);
    assert_eq!(m.source, "stare");

    let (train2, test2) = load_dataset(dir.path(), Layout::Stare, Some(&m)).unwrap();
    assert_eq!(train, train2);
    assert_eq!(test, test2);
}

#[test]
fn manifest_controls_flat_split() {
    let dir = tempfile::tempdir().unwrap();
    stare_fixture(dir.path());
    let m = SplitManifest::parse("[train]\nim0139\n[test]\nim0001\nim0044\nim0077\n").unwrap();
    let (train, test) = load_dataset(dir.path(), Layout::Flat, Some(&m)).unwrap();
    assert_eq!(ids(&train), ["im0139"]);
    assert_eq!(ids(&test), ["im0001", "im0044", "im0077"]);
    let (all, none) = load_dataset(dir.path(), Layout::Flat, None).unwrap();
    assert_eq!(all.len(), 4);
    assert!(none.is_empty());
}

#[test]
fn loading_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    drive_fixture(dir.path());
    let a = load_dataset(dir.path(), Layout::Drive, None).unwrap();
    let b = load_dataset(dir.path(), Layout::Drive, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_ground_truth_names_the_id() {
    let dir = tempfile::tempdir().unwrap();
    stare_fixture(dir.path());
    fs::remove_file(dir.path().join("labels/im0077.pgm")).unwrap();
    match load_dataset(dir.path(), Layout::Stare, None) {
        Err(Error::Ingestion { id, .. }) => assert_eq!(id, "im0077"),
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn grey_ground_truth_is_binarized() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path(), "labels", "a", 0, 200);
    write_pair(dir.path(), "labels", "b", 1, 100);
    let (all, _) = load_dataset(dir.path(), Layout::Flat, None).unwrap();
    assert_eq!(all[0].gt_mask.count_nonzero(), 10);
    assert_eq!(all[1].gt_mask.count_nonzero(), 0);
    assert!(all.iter().all(|s| s.gt_mask.is_binary()));
}

#[test]
fn unknown_manifest_id_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    stare_fixture(dir.path());
    let m = SplitManifest::parse("[train]\nim0001\nim0044\nim0077\nim0139\n[test]\nim9999\n").unwrap();
    assert!(matches!(
        load_dataset(dir.path(), Layout::Stare, Some(&m)),
        Err(Error::Ingestion { .. })
    ));
}

#[test]
fn dilated_ground_truth_covers_dark_ridges() {
    // A pixel darker than both neighbours along a row or column by a clear
    // margin is a ridge the curve painter drew.
    for seed in 0..5 {
        for s in synth_vessels(seed, 128, 1).unwrap() {
            let (w, h) = s.image.dims();
            let img = s.image.data();
            let gt = s.gt_mask.data();
            let near_gt = |x: usize, y: usize| {
                (y.saturating_sub(2)..(y + 3).min(h))
                    .any(|yy| (x.saturating_sub(2)..(x + 3).min(w)).any(|xx| gt[yy * w + xx] > 0))
            };
            for y in 3..h - 3 {
                for x in 3..w - 3 {
                    let v = img[y * w + x] as i32;
                    let at = |dx: isize, dy: isize| {
                        img[(y as isize + dy) as usize * w + (x as isize + dx) as usize] as i32
                    };
                    let ridge_h = at(-3, 0) - v > 20 && at(3, 0) - v > 20;
                    let ridge_v = at(0, -3) - v > 20 && at(0, 3) - v > 20;
                    if ridge_h || ridge_v {
                        assert!(near_gt(x, y), "seed {seed}: dark ridge at ({x},{y}) outside gt");
                    }
                }
            }
        }
    }
}
