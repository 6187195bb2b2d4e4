//! Label-budget sweep: the full grid of (m_labeled, seed, method) runs with
//! per-seed and aggregate metrics rows.

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::eval::{aggregate_rows, evaluate, test_dataset, MetricsRow, Policy};
use crate::harness::train::{finetune, pretrain, train_supervised_only};
use crate::netsim::generate_dataset;
use crate::wmmse::{label_dataset, WmmseSettings};

/// Default label budgets for the sweep grid.
pub const DEFAULT_M_LABELED_GRID: &[usize] = &[25, 50, 100, 200, 400, 800];

/// Run the SSL pipeline (pretrain + fine-tune) and the three baselines for
/// one (m_labeled, seed) cell; returns the four per-seed rows.
pub fn run_cell(cfg: &RunConfig, run_id: &str) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let settings = WmmseSettings::default();
    let ds = generate_dataset(cfg.seed, cfg.m_total, &cfg.network);
    let ds = label_dataset(&ds, cfg.m_labeled, &settings)?;
    let test = test_dataset(cfg);

    let pre = pretrain(&ds, cfg)?;
    let ssl = finetune(&pre.model, &ds, cfg)?;
    let sl = train_supervised_only(&ds, cfg)?;

    Ok(vec![
        evaluate(&Policy::Model(&ssl.model), &test, cfg, run_id, "ssl")?,
        evaluate(&Policy::Model(&sl.model), &test, cfg, run_id, "sl_only")?,
        evaluate(&Policy::FullReuse, &test, cfg, run_id, "")?,
        evaluate(&Policy::Wmmse, &test, cfg, run_id, "")?,
    ])
}

/// Full sweep over label budgets and seeds. Emits per-seed rows followed by
/// `aggregate` rows for every grid point.
pub fn sweep(
    base: &RunConfig,
    seeds: &[u64],
    m_labeled_grid: &[usize],
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for &m_labeled in m_labeled_grid {
        let run_id = format!("n{}_ml{}", base.network.n(), m_labeled);
        let mut cell_rows = Vec::new();
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.m_labeled = m_labeled;
            if cfg.m_total < m_labeled {
                cfg.m_total = m_labeled;
            }
            cfg.seed = seed;
            cell_rows.extend(run_cell(&cfg, &run_id)?);
        }
        let agg = aggregate_rows(&cell_rows, &run_id);
        rows.extend(cell_rows);
        rows.extend(agg);
    }
    Ok(rows)
}
