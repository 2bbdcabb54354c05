mod oracles;

use mmflow_core::generate::{cycle, generate, grid_2d, path_grid_1d, random_euclidean, two_point};
use mmflow_core::heatflow::run_heat_flow;
use mmflow_core::transport::solve_w2;
use mmflow_core::{ProbMeasure, Space, SpaceSpec};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random masses on between one and `max_support` points.
fn sparse_measure(space: &Space, rng: &mut ChaCha8Rng, max_support: usize) -> ProbMeasure {
    let support = rng.random_range(1..=max_support);
    let mut masses = vec![0.0; space.len()];
    for x in sample(rng, space.len(), support) {
        masses[x] = rng.random_range(0.05..1.0);
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    ProbMeasure::from_masses(space, &masses).unwrap()
}

#[test]
fn exact_transport_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..60 {
        let n = rng.random_range(4..=12);
        let space = random_euclidean(n, 1 + (seed % 3) as usize, seed).unwrap();
        let mu = sparse_measure(&space, &mut rng, 4);
        let nu = sparse_measure(&space, &mut rng, 4);
        let (sa, sb) = (mu.support(), nu.support());
        let (ma, mb) = (mu.masses(&space), nu.masses(&space));
        let a: Vec<f64> = sa.iter().map(|&x| ma[x]).collect();
        let b: Vec<f64> = sb.iter().map(|&y| mb[y]).collect();
        let cost: Vec<Vec<f64>> = sa.iter().map(|&x| sb.iter().map(|&y| space.d2(x, y)).collect()).collect();
        let want = oracles::transport_by_vertices(&a, &b, &cost);
        let got = solve_w2(&space, &mu, &nu).unwrap();
        assert!((got.primal_value - want).abs() <= 1e-9, "seed {seed}: {} vs {want}", got.primal_value);
        assert!((got.w2 * got.w2 - want).abs() <= 1e-9);
    }
}

#[test]
fn transport_on_the_line_matches_quantile_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..40 {
        let n = rng.random_range(2..=24);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let n = xs.len();
        let dist = (0..n).map(|i| (0..n).map(|j| (xs[i] - xs[j]).abs()).collect()).collect();
        let edges = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        let points = (0..n).map(|i| format!("x{i}")).collect();
        let space = Space::build(points, dist, vec![1.0 / n as f64; n], edges).unwrap();
        let mu = sparse_measure(&space, &mut rng, n);
        let nu = sparse_measure(&space, &mut rng, n);
        let want = oracles::quantile_w2sq(&xs, &mu.masses(&space), &xs, &nu.masses(&space));
        let got = solve_w2(&space, &mu, &nu).unwrap().primal_value;
        assert!((got - want).abs() <= 1e-10, "case {case}: {got} vs {want}");
    }
}

#[test]
fn worked_transport_example() {
    let space = path_grid_1d(3).unwrap();
    let mu = ProbMeasure::from_masses(&space, &[0.5, 0.5, 0.0, 0.0]).unwrap();
    let nu = ProbMeasure::from_masses(&space, &[0.0, 0.0, 0.5, 0.5]).unwrap();
    let cost = vec![vec![space.d2(0, 2), space.d2(0, 3)], vec![space.d2(1, 2), space.d2(1, 3)]];
    let want = oracles::transport_by_vertices(&[0.5, 0.5], &[0.5, 0.5], &cost);
    assert!((want - 4.0 / 9.0).abs() < 1e-15);
    let got = solve_w2(&space, &mu, &nu).unwrap();
    assert!((got.w2 - 2.0 / 3.0).abs() <= 1e-12);
    assert!((got.coupling.get(0, 2) - 0.5).abs() <= 1e-12);
    assert!((got.coupling.get(1, 3) - 0.5).abs() <= 1e-12);
    assert!(got.gap() <= 1e-9);
}

#[test]
fn graph_distances_are_shortest_paths() {
    // Edge lengths are the grid spacing; edge weights are conductances.
    let spaces = [
        (path_grid_1d(7).unwrap(), 1.0 / 7.0),
        (cycle(3).unwrap(), 1.0),
        (cycle(9).unwrap(), 1.0),
        (grid_2d(4).unwrap(), 0.25),
    ];
    for (space, h) in &spaces {
        let edges: Vec<_> = space.edges().iter().map(|&(i, j, _)| (i, j, *h)).collect();
        let fw = oracles::floyd_warshall(space.len(), &edges);
        for x in 0..space.len() {
            for y in 0..space.len() {
                assert!((space.d(x, y) - fw[x][y]).abs() <= 1e-12, "{x},{y}");
            }
        }
    }
    let c3 = cycle(3).unwrap();
    for x in 0..3 {
        for y in 0..3 {
            assert!(c3.d(x, y) == 0.0 || (c3.d(x, y) - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn generated_specs_agree_with_constructors() {
    let by_spec = generate("random_euclidean(9,2,4)".parse::<SpaceSpec>().unwrap()).unwrap();
    assert_eq!(by_spec, random_euclidean(9, 2, 4).unwrap());
    let by_spec = generate("two_point(2)".parse::<SpaceSpec>().unwrap()).unwrap();
    assert_eq!(by_spec.d(0, 1), 2.0);
    assert_eq!(by_spec, two_point(2.0).unwrap());
}

#[test]
fn heat_flow_matches_two_point_eigen_oracle() {
    let space = two_point(1.0).unwrap();
    let delta = 0.5;
    for dt in [0.1, 0.05, 0.025] {
        let traj = run_heat_flow(&space, &[1.0 + delta, 1.0 - delta], 1.0, dt).unwrap();
        let mut worst: f64 = 0.0;
        for (k, rho) in traj.densities.iter().enumerate() {
            let scheme = oracles::two_point_implicit_euler(delta, dt, k);
            assert!((rho[0] - scheme[0]).abs() <= 1e-13 && (rho[1] - scheme[1]).abs() <= 1e-13);
            let exact = oracles::two_point_exact(delta, traj.times[k]);
            worst = worst.max((rho[0] - exact[0]).abs());
        }
        // First order: the global error of implicit Euler is below 2·dt·|ρ0|.
        assert!(worst <= 2.0 * dt * 1.5, "dt {dt}: {worst}");
    }
}
