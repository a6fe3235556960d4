use rextra::algorithms::{run, Algorithm, RunConfig};
use rextra::harness::{self, parse_config_in, ProblemConfig};
use rextra::linalg::{gaussian, stream_rng};
use rextra::problems::{save_matrix, LocalObjectives, MatrixFormat};

fn paper_pca(algorithm: &str) -> String {
    format!(
        "[problem]\nkind = pca_synthetic\n[graph]\nkind = er\np = 0.6\n[algorithm]\nname = {algorithm}\ngrid = {{1,2,4,6,8}} x {{1e-5,1e-4,1e-3,1e-2}}\n"
    )
}

#[test]
fn rextra_tolerates_a_step_at_least_as_large_as_dprgt() {
    let best = |name: &str| {
        let cfg = harness::parse_config(&paper_pca(name)).unwrap();
        let problem = harness::build_problem(&cfg).unwrap();
        let (_, w) = harness::build_network(&cfg).unwrap();
        harness::grid_search(&cfg, &problem, &w)
            .unwrap()
            .best()
            .alpha
    };
    assert!(best("rextra") >= best("dprgt"));
}

#[test]
fn file_backed_pca_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = stream_rng(8, 0);
    let data = gaussian(120, 6, &mut rng) * 40.0;
    save_matrix(tmp.path().join("data.bin"), &data, MatrixFormat::RawF64).unwrap();
    let text = "[problem]\nkind = pca_file\npath = data.bin\nformat = raw_f64\nn = 4\nr = 2\nnormalize = 40\n[graph]\nkind = complete\n[algorithm]\nname = rextra\nalpha = 0.01\n[run]\nmax_epochs = 3000\n";
    let cfg = parse_config_in(text, Some(tmp.path())).unwrap();
    assert!(matches!(
        cfg.problem,
        ProblemConfig::PcaFile { agents: 4, .. }
    ));
    let problem = harness::build_problem(&cfg).unwrap();
    assert_eq!(problem.manifold().shape(), (6, 2));
    let (_, w) = harness::build_network(&cfg).unwrap();
    let trace = run(&problem, &w, &cfg.run_config(0.01), None).unwrap();
    assert!(trace.converged(), "{}", trace.termination);

    let missing = "[problem]\nkind = pca_file\npath = nope.csv\n[graph]\nkind = ring\n[algorithm]\nname = rextra\nalpha = 0.1\n";
    let errs = parse_config_in(missing, Some(tmp.path())).unwrap_err();
    assert_eq!(errs.0[0].line, 3);
}

#[test]
fn minibatch_epochs_count_sampled_data() {
    let cfg = harness::parse_config(
        "[problem]\nkind = pca_synthetic\nn = 4\nm_per = 200\n[graph]\nkind = ring\n[algorithm]\nname = rextra\nalpha = 1e-3\nbatch = 50\n[run]\nmax_epochs = 3\n",
    )
    .unwrap();
    let problem = harness::build_problem(&cfg).unwrap();
    let (_, w) = harness::build_network(&cfg).unwrap();
    let trace = run(&problem, &w, &cfg.run_config(1e-3), None).unwrap();
    // Four iterations per epoch at a quarter of the rows each.
    assert_eq!(trace.last().k, 12);
    assert!((trace.last().epoch - 3.0).abs() < 1e-9);
}

#[test]
fn rextra_ends_below_every_baseline_on_small_pca() {
    let cfg = harness::parse_config(
        "[problem]\nkind = pca_synthetic\nn = 4\nm_per = 100\nd = 6\nr = 2\n[graph]\nkind = er\np = 0.6\n[algorithm]\nname = rextra\nalpha = 1e-3\n[run]\nmax_epochs = 300\n",
    )
    .unwrap();
    let problem = harness::build_problem(&cfg).unwrap();
    let (_, w) = harness::build_network(&cfg).unwrap();
    let finals: Vec<(Algorithm, f64, f64)> = Algorithm::ALL
        .into_iter()
        .filter(|&a| a != Algorithm::Extra)
        .map(|algorithm| {
            let config = RunConfig {
                algorithm,
                ..cfg.run_config(2e-3)
            };
            let trace = run(&problem, &w, &config, None).unwrap();
            (
                algorithm,
                trace.rows[0].grad_norm.unwrap(),
                trace.last().grad_norm.unwrap(),
            )
        })
        .collect();
    let rextra = finals[0];
    assert_eq!(rextra.0, Algorithm::Rextra);
    for &(algorithm, first, last) in &finals {
        assert!(last < 0.5 * first, "{algorithm}: {first} -> {last}");
        assert!(rextra.2 <= last, "{algorithm} ends below rextra");
    }
}
