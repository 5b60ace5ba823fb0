//! The three indexes behind the shared trait, exercised through the public API.

use bdl_core::{
    gen_uniform, gen_visualvar, read_points, write_points, B1Tree, B2Tree, BdlConfig, BdlTree,
    DynamicIndex, Format, Point, SplitHeuristic, VisualVarParams,
};

fn all(d: usize, h: SplitHeuristic) -> Vec<Box<dyn DynamicIndex>> {
    let cfg = BdlConfig {
        buffer_size: 128,
        heuristic: h,
        ..BdlConfig::default()
    };
    vec![
        Box::new(BdlTree::new(d, cfg).unwrap()),
        Box::new(B1Tree::new(d, h).unwrap()),
        Box::new(B2Tree::new(d, h).unwrap()),
    ]
}

fn brute(points: &[Point], q: &Point, k: usize) -> Vec<(u64, u64)> {
    let mut v: Vec<(f64, u64)> = points
        .iter()
        .map(|p| (bdl_core::squared_distance(p.coords(), q.coords()), p.id()))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().take(k).map(|(d, id)| (id, d.to_bits())).collect()
}

#[test]
fn clustered_workload_matches_brute_force() {
    let n = 6000;
    let pts = gen_visualvar(n, 3, 4, VisualVarParams::defaults_for(n)).unwrap();
    let queries: Vec<Point> = pts.iter().step_by(97).cloned().collect();
    for h in [SplitHeuristic::ObjectMedian, SplitHeuristic::SpatialMedian] {
        for mut idx in all(3, h) {
            for chunk in pts.chunks(700) {
                idx.insert(chunk).unwrap();
            }
            let erased = idx.erase(&pts[..n / 3]).unwrap();
            assert_eq!(erased, n / 3, "{}", idx.name());
            let live = &pts[n / 3..];
            let got = idx.knn(&queries, 8).unwrap();
            for (q, g) in queries.iter().zip(&got) {
                let g: Vec<(u64, u64)> = g.iter().map(|nb| (nb.id, nb.dist2.to_bits())).collect();
                assert_eq!(g, brute(live, q, 8), "{} {h:?}", idx.name());
            }
        }
    }
}

#[test]
fn file_round_trip_feeds_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.bin");
    let pts = gen_uniform(2500, 5, 9).unwrap();
    write_points(&path, &pts, Format::Binary).unwrap();
    let back = read_points(&path, Format::Binary).unwrap();
    assert_eq!(back, pts);
    let tree = BdlTree::build(5, &back, BdlConfig::default()).unwrap();
    assert_eq!(tree.len(), 2500);
    tree.validate().unwrap();
    let got = tree.knn(&back[..10], 1).unwrap();
    for (p, g) in back[..10].iter().zip(&got) {
        assert_eq!(g[0].dist2, 0.0);
        assert_eq!(g[0].id, p.id());
    }
}

#[test]
fn dimension_mismatch_is_rejected_everywhere() {
    for mut idx in all(2, SplitHeuristic::ObjectMedian) {
        let bad = [Point::new(0, vec![1.0, 2.0, 3.0]).unwrap()];
        assert!(idx.insert(&bad).is_err(), "{}", idx.name());
        idx.insert(&[Point::new(1, vec![1.0, 2.0]).unwrap()]).unwrap();
        assert!(idx.knn(&bad, 1).is_err(), "{}", idx.name());
        assert!(idx.erase(&bad).is_err(), "{}", idx.name());
        assert_eq!(idx.len(), 1);
    }
}
