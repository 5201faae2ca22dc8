use proptest::prelude::*;
use yamabe_core::*;

fn graph_strategy() -> impl Strategy<Value = WeightedGraph> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec((0.0f64..1.0, 0.05f64..2.0), n - 1),
                proptest::collection::vec((0..n, 0..n, 0.05f64..2.0), 0..n),
                proptest::collection::vec(0.1f64..2.0, n),
            )
        })
        .prop_map(|(n, tree, extra, mu)| {
            let mut edges: Vec<(usize, usize, f64)> = tree
                .iter()
                .enumerate()
                .map(|(i, &(r, w))| (((i + 1) as f64 * r) as usize, i + 1, w))
                .collect();
            for (a, b, w) in extra {
                let key = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y, _)| (x.min(y), x.max(y)) == key) {
                    edges.push((key.0, key.1, w));
                }
            }
            WeightedGraph::from_edges(n, &edges, mu).unwrap()
        })
}

fn with_function(lo: f64, hi: f64) -> impl Strategy<Value = (WeightedGraph, VertexFunction)> {
    graph_strategy().prop_flat_map(move |g| {
        let n = g.n();
        (Just(g), proptest::collection::vec(lo..hi, n).prop_map(|v| VertexFunction::new(v).unwrap()))
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn integrate_is_additive((g, f) in with_function(-3.0, 3.0), c in -2.0f64..2.0) {
        let f2 = f.map(|v| c * v + 1.0).unwrap();
        let sum = VertexFunction::new(f.iter().zip(&f2).map(|(a, b)| a + b).collect()).unwrap();
        let lhs = integrate(&g, &sum).unwrap();
        let rhs = integrate(&g, &f).unwrap() + integrate(&g, &f2).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn hop_distance_is_a_metric(g in graph_strategy()) {
        let n = g.n();
        let d: Vec<Vec<usize>> = (0..n).map(|x| graph_distance(&g, x).unwrap()).collect();
        for x in 0..n {
            prop_assert_eq!(d[x][x], 0);
            for y in 0..n {
                prop_assert_eq!(d[x][y], d[y][x]);
                for z in 0..n {
                    prop_assert!(d[x][z] <= d[x][y] + d[y][z]);
                }
            }
        }
    }

    #[test]
    fn p_laplacian_is_homogeneous_and_translation_invariant(
        (g, u) in with_function(-2.0, 2.0), p in 2.0f64..5.0, c in -3.0f64..3.0, t in -5.0f64..5.0
    ) {
        let base = p_laplacian(&g, p, &u).unwrap();
        let scaled = p_laplacian(&g, p, &u.scaled(c)).unwrap();
        let shifted = p_laplacian(&g, p, &u.map(|v| v + t).unwrap()).unwrap();
        let factor = c.abs().powf(p - 2.0) * c;
        for x in 0..g.n() {
            prop_assert!(close(scaled[x], factor * base[x], 1e-9));
            prop_assert!(close(shifted[x], base[x], 1e-9));
        }
    }

    #[test]
    fn integration_by_parts((g, u) in with_function(-2.0, 2.0), p in 2.0f64..5.0) {
        let (lhs, rhs) = ibp_identity_check(&g, p, &u).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn energy_is_the_norm_to_the_p((g, u) in with_function(-2.0, 2.0), p in 2.0f64..5.0) {
        let n = g.n();
        let spec = ProblemSpec::new(p, 2.0 + 0.5 * (p - 2.0), 0.1, 1.0,
            VertexFunction::constant(n, 1.5), VertexFunction::constant(n, 1.0));
        let j = energy_j(&g, &spec, &u).unwrap();
        prop_assert!(close(h_norm(&g, &spec, &u).unwrap().powf(p), j, 1e-10));
    }

    #[test]
    fn constraint_is_alpha_homogeneous((g, u) in with_function(-1.0, 2.0), c in 0.01f64..4.0, alpha in 2.1f64..4.0) {
        let n = g.n();
        let spec = ProblemSpec::new(4.0, alpha, 0.1, 1.3,
            VertexFunction::constant(n, 1.0), VertexFunction::constant(n, 0.7));
        let k = constraint_k(&g, &spec, &u).unwrap();
        let kc = constraint_k(&g, &spec, &u.scaled(c)).unwrap();
        prop_assert!(close(kc, c.powf(alpha) * k, 1e-12));
    }
}

fn path_problem(n: usize, theta: f64) -> (WeightedGraph, ProblemSpec) {
    let g = generate(GraphFamily::Path { n }, GeneratorOptions::default()).unwrap();
    let h = VertexFunction::from_fn(n, |i| 1.0 + 0.2 * i as f64).unwrap();
    let gg = VertexFunction::from_fn(n, |i| 1.0 + 0.5 * (i as f64).sin()).unwrap();
    (g, ProblemSpec::new(4.0, 3.0, 0.4, theta, h, gg))
}

#[test]
fn minimizer_beats_random_competitors() {
    use rand::{Rng, SeedableRng};
    let (g, s) = path_problem(9, 1.0);
    let r = solve(&g, &s, &SolveOptions::default()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let v = VertexFunction::from_fn(g.n(), |_| rng.random::<f64>()).unwrap();
        let k = constraint_k(&g, &s, &v).unwrap();
        let v = v.scaled(k.powf(-1.0 / s.alpha));
        assert!(energy_j(&g, &s, &v).unwrap() >= r.gamma - 1e-12);
    }
}

#[test]
fn solution_does_not_depend_on_theta() {
    let (g, s) = path_problem(11, 1.0);
    let base = solve(&g, &s, &SolveOptions::default()).unwrap();
    for theta in [0.25, 3.0] {
        let other = solve(&g, &s.with_theta(theta), &SolveOptions::default()).unwrap();
        for (a, b) in base.u.iter().zip(&other.u) {
            assert!((a - b).abs() <= 1e-7 * base.u.sup_norm());
        }
    }
}

#[test]
fn exhaustion_on_a_tree_is_monotone() {
    let g = generate(GraphFamily::TreeBall { branching: 2, depth: 5 }, GeneratorOptions::default()).unwrap();
    let dist = graph_distance(&g, 0).unwrap();
    let h = VertexFunction::new(dist.iter().map(|&d| 1.0 + (d * d) as f64).collect()).unwrap();
    let s = ProblemSpec::new(3.5, 3.0, 0.3, 1.0, h, VertexFunction::constant(g.n(), 1.0));
    let table = exhaustion_study(&g, &s, 0, &[1, 2, 3, 5], &SolveOptions::default()).unwrap();
    assert!(table.monotone, "{table:?}");
    assert!(table.rows.iter().all(|r| r.converged));
    assert!(table.rows.windows(2).all(|w| w[1].tail_bound <= w[0].tail_bound));
}

proptest! {
    #[test]
    fn ball_problem_is_the_zero_extension(
        (g, u) in with_function(0.0, 2.0), radius in 0usize..4, p in 2.0f64..5.0
    ) {
        let n = g.n();
        let spec = ProblemSpec::new(p, 2.0 + 0.5 * (p - 2.0), 0.1, 1.0,
            VertexFunction::from_fn(n, |i| 1.0 + i as f64).unwrap(), VertexFunction::constant(n, 0.8));
        let ball = truncate_ball(&g, &TruncationSpec::new(0, radius, 1.0).unwrap()).unwrap();
        let local = spec.on_ball(&ball).unwrap();
        let inner = ball.restrict(&u).unwrap();
        let outer = ball.extend(&inner).unwrap();
        prop_assert!(close(energy_j(&ball.graph, &local, &inner).unwrap(), energy_j(&g, &spec, &outer).unwrap(), 1e-12));
        prop_assert!(close(constraint_k(&ball.graph, &local, &inner).unwrap(), constraint_k(&g, &spec, &outer).unwrap(), 1e-12));
        // the ball equation is the full equation at ball vertices
        let w_ball = j_gradient(&ball.graph, &local, &inner).unwrap();
        let w_full = j_gradient(&g, &spec, &outer).unwrap();
        for (new, &old) in ball.old_index.iter().enumerate() {
            prop_assert!(close(w_ball[new], w_full[old], 1e-10));
        }
    }
}
