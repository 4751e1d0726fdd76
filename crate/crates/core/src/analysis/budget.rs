use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{ensure_nonneg, ensure_unit, Result};
use crate::physics::{attenuate_rate, car_to_fidelity, expected_accidentals, Arm};
use crate::sim::pair_rate;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmBudget {
    /// Individual losses along the arm, dB.
    pub losses_db: Vec<f64>,
    pub efficiency: f64,
    pub dark_cps: f64,
    /// Uncorrelated photons arriving at the detector, counts/s.
    pub background_cps: f64,
}

impl ArmBudget {
    pub fn lossless() -> Self {
        Self {
            losses_db: Vec::new(),
            efficiency: 1.0,
            dark_cps: 0.0,
            background_cps: 0.0,
        }
    }

    pub fn total_loss_db(&self) -> f64 {
        self.losses_db.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        for &l in &self.losses_db {
            ensure_nonneg("loss_db", l)?;
        }
        ensure_unit("efficiency", self.efficiency)?;
        ensure_nonneg("dark_cps", self.dark_cps)?;
        ensure_nonneg("background_cps", self.background_cps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    pub signal_loss_db: f64,
    pub idler_loss_db: f64,
    pub coincidence_cps: f64,
    pub signal_singles_cps: f64,
    pub idler_singles_cps: f64,
}

/// Analyzer-free pair budget: both photons must survive their arm and be
/// detected.
pub fn link_budget(source_rate: f64, signal: &ArmBudget, idler: &ArmBudget) -> Result<LinkBudget> {
    ensure_nonneg("source_rate", source_rate)?;
    signal.validate()?;
    idler.validate()?;
    let (ls, li) = (signal.total_loss_db(), idler.total_loss_db());
    let singles = |arm: &ArmBudget, loss: f64| {
        attenuate_rate(source_rate, loss) * arm.efficiency
            + arm.dark_cps
            + arm.background_cps * arm.efficiency
    };
    Ok(LinkBudget {
        signal_loss_db: ls,
        idler_loss_db: li,
        coincidence_cps: attenuate_rate(source_rate, ls + li)
            * signal.efficiency
            * idler.efficiency,
        signal_singles_cps: singles(signal, ls),
        idler_singles_cps: singles(idler, li),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmLosses {
    pub span_db: f64,
    pub dcm_db: f64,
    pub insertion_db: f64,
    pub total_db: f64,
    pub efficiency: f64,
    pub singles_cps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTable {
    pub source_rate: f64,
    /// Deployed-link loss: both spans plus the compensator, excluding local
    /// optics.
    pub link_loss_db: f64,
    pub signal: ArmLosses,
    pub idler: ArmLosses,
    pub coincidence_cps: f64,
    pub accidental_cps: f64,
    pub car: f64,
    pub fidelity_bound: f64,
}

pub fn budget_table(cfg: &ExperimentConfig) -> Result<BudgetTable> {
    cfg.validate()?;
    let source_rate = pair_rate(&cfg.source);
    let arm_budget = |arm: Arm| {
        let f = cfg.fiber(arm);
        let det = cfg.detector(arm);
        let dcm = cfg.dcm_on(arm).map_or(0.0, |d| d.insertion_loss_db);
        let budget = ArmBudget {
            losses_db: vec![f.span_loss_db(), dcm, f.insertion_loss_db],
            efficiency: det.efficiency,
            dark_cps: det.dark_rate_cps,
            background_cps: f.background_rate_cps * cfg.downstream_transmission(arm),
        };
        (budget, f.span_loss_db(), dcm, f.insertion_loss_db)
    };
    let (bs, span_s, dcm_s, ins_s) = arm_budget(Arm::Signal);
    let (bi, span_i, dcm_i, ins_i) = arm_budget(Arm::Idler);
    let lb = link_budget(source_rate, &bs, &bi)?;
    let accidental_cps = expected_accidentals(
        lb.signal_singles_cps,
        lb.idler_singles_cps,
        cfg.window_ps as f64,
    );
    let car = if accidental_cps > 0.0 {
        lb.coincidence_cps / accidental_cps
    } else {
        f64::INFINITY
    };
    Ok(BudgetTable {
        source_rate,
        link_loss_db: span_s + span_i + dcm_s + dcm_i,
        signal: ArmLosses {
            span_db: span_s,
            dcm_db: dcm_s,
            insertion_db: ins_s,
            total_db: lb.signal_loss_db,
            efficiency: bs.efficiency,
            singles_cps: lb.signal_singles_cps,
        },
        idler: ArmLosses {
            span_db: span_i,
            dcm_db: dcm_i,
            insertion_db: ins_i,
            total_db: lb.idler_loss_db,
            efficiency: bi.efficiency,
            singles_cps: lb.idler_singles_cps,
        },
        coincidence_cps: lb.coincidence_cps,
        accidental_cps,
        car,
        fidelity_bound: car_to_fidelity(car)?,
    })
}
