use ctflood_core::airtime::PhyMode;
use ctflood_core::mesh::{end_to_end_per, run, summarize, SimConfig, Topology};
use ctflood_core::node::NodePolicy;

/// 4×4 grid with unit spacing; links up to 2.3 units, log-distance path loss.
fn grid_topology() -> Topology {
    let pos: Vec<(f64, f64)> = (0..16).map(|i| ((i % 4) as f64, (i / 4) as f64)).collect();
    let mut edges = Vec::new();
    for a in 0..16 {
        for b in a + 1..16 {
            let d = ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt();
            if d <= 2.3 {
                edges.push((a, b, -55.0 - 25.0 * d.log10()));
            }
        }
    }
    Topology::from_edges(16, &edges, 0).unwrap().with_random_cfo(10.0, 4).unwrap()
}

fn loss(n_tx: u32, rounds: u32) -> f64 {
    let cfg = SimConfig {
        rounds,
        seed: 99,
        ..SimConfig::new(grid_topology(), NodePolicy::new(n_tx, 3), PhyMode::Le2M)
    };
    end_to_end_per(&run(&cfg).unwrap().rounds)
}

#[test]
fn more_transmissions_do_not_increase_loss() {
    let losses: Vec<f64> = [1, 2, 3, 7].iter().map(|&n| loss(n, 1000)).collect();
    eprintln!("{losses:?}");
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    assert!(losses[0] > losses[3]);
}

#[test]
fn summary_reports_flood_metrics() {
    let cfg = SimConfig { rounds: 200, seed: 1, ..SimConfig::new(grid_topology(), NodePolicy::new(3, 3), PhyMode::Le2M) };
    let s = summarize(&run(&cfg).unwrap().rounds, &cfg);
    assert_eq!(s.rounds, 200);
    assert!(s.avg_hop >= 1.0 && s.avg_hop <= 7.0);
    assert!(s.duty_cycle_pct > 0.0 && s.duty_cycle_pct < 5.0);
}
