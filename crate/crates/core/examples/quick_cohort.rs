//! Simulates a cohort in memory and prints per-participant LOO results.
//!
//! `cargo run --release -p brainpref --example quick_cohort -- [config.toml] [n_participants] [n_perm]`

use std::time::Instant;

use brainpref::config::PipelineConfig;
use brainpref::evaluation::Task;
use brainpref::labeling::group_ranking;
use brainpref::pipeline::{evaluate_vectors, participant_features, participant_seed};
use brainpref::synth::{ground_truth, simulate_participant};

fn main() -> brainpref::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = match args.first().filter(|a| a.ends_with(".toml")) {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let rest: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    cfg.seed.get_or_insert(1);
    if let Some(&n) = rest.first() {
        cfg.simulation.n_participants = n;
    }
    let n_perm = rest.get(1).copied().unwrap_or(100);
    cfg.validate()?;
    let sim = cfg.simulation()?;
    let truth = ground_truth(&sim)?;
    let ratings = truth.all_ratings();
    let ranking = group_ranking(&ratings)?;
    let seed = cfg.seed()?;
    let (mut n_sig, mut aucs) = (0usize, Vec::new());
    for p in 0..sim.n_participants {
        let t0 = Instant::now();
        let rec = simulate_participant(&sim, &truth, p)?;
        let t_sim = t0.elapsed();
        let f = participant_features(rec, &ratings, &ranking, &cfg.filter, &cfg.rejection)?;
        let t_feat = t0.elapsed();
        let pid = f.participant_id.clone();
        let r = evaluate_vectors(&f.explicit, &pid, Task::Explicit, n_perm, participant_seed(seed, &pid))?;
        let t_eval = t0.elapsed();
        let group = match &f.group {
            Ok(v) => {
                let g = evaluate_vectors(v, &pid, Task::Group, n_perm, participant_seed(seed, &pid))?;
                format!("group n={} auc {:.3} p {:.3}", v.len(), g.auc, g.p_value)
            }
            Err(reason) => format!("group n/a ({reason})"),
        };
        n_sig += (r.p_value <= cfg.evaluation.alpha) as usize;
        aucs.push(r.auc);
        println!(
            "{pid} carrier={} n={} auc {:.3} p {:.3} | {group} | sim {:.1}s feat {:.1}s eval {:.1}s",
            truth.participants[p].carrier,
            f.explicit.len(),
            r.auc,
            r.p_value,
            t_sim.as_secs_f64(),
            (t_feat - t_sim).as_secs_f64(),
            (t_eval - t_feat).as_secs_f64(),
        );
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    println!("significant {n_sig}/{} mean auc {mean:.3}", aucs.len());
    Ok(())
}
