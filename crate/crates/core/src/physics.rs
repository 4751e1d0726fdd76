//! Closed-form polarization-correlation and link-budget formulas.
//!
//! Everything here is a pure function of its arguments. Angles cross the
//! public boundary in degrees and are converted to radians internally.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonneg, ensure_unit, Error, Result};

/// Which photon of the pair a component acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Mixture `V |Phi><Phi| + (1 - V) I/4` of the `(|HH> + |VV>)/sqrt 2` Bell
/// state with white noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerState {
    visibility: f64,
}

impl WernerState {
    pub fn new(visibility: f64) -> Result<Self> {
        ensure_unit("visibility", visibility)?;
        Ok(Self { visibility })
    }

    pub fn pure() -> Self {
        Self { visibility: 1.0 }
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    H,
    V,
    D,
    A,
    #[serde(rename = "free")]
    Free,
}

impl Basis {
    pub const ALL: [Basis; 4] = [Basis::H, Basis::V, Basis::D, Basis::A];

    /// Half-wave-plate angle that projects the transmitted PBS port onto
    /// this basis, or `None` for a free setting.
    pub fn hwp_deg(self) -> Option<f64> {
        match self {
            Basis::H => Some(0.0),
            Basis::V => Some(45.0),
            Basis::D => Some(22.5),
            Basis::A => Some(67.5),
            Basis::Free => None,
        }
    }

    pub fn parse(s: &str) -> Option<Basis> {
        match s.trim() {
            "H" | "h" => Some(Basis::H),
            "V" | "v" => Some(Basis::V),
            "D" | "d" => Some(Basis::D),
            "A" | "a" => Some(Basis::A),
            "free" => Some(Basis::Free),
            _ => None,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::H => "H",
            Basis::V => "V",
            Basis::D => "D",
            Basis::A => "A",
            Basis::Free => "free",
        };
        f.write_str(s)
    }
}

/// Wave-plate settings in front of one arm's polarizing beam splitter.
///
/// The quarter-wave plate angle is carried for calibration bookkeeping only;
/// every probability formula requires it to be zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSetting {
    pub hwp_deg: f64,
    #[serde(default)]
    pub qwp_deg: f64,
    pub basis: Basis,
}

impl AnalyzerSetting {
    pub fn basis(basis: Basis) -> Self {
        Self {
            hwp_deg: basis.hwp_deg().unwrap_or(0.0),
            qwp_deg: 0.0,
            basis,
        }
    }

    pub fn free(hwp_deg: f64) -> Self {
        Self {
            hwp_deg,
            qwp_deg: 0.0,
            basis: Basis::Free,
        }
    }

    /// The same plate rotated by `delta_deg`; the result is a free setting.
    pub fn rotated(&self, delta_deg: f64) -> Self {
        Self {
            hwp_deg: self.hwp_deg + delta_deg,
            qwp_deg: self.qwp_deg,
            basis: Basis::Free,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("hwp_deg", self.hwp_deg)?;
        ensure_finite("qwp_deg", self.qwp_deg)?;
        if let Some(expected) = self.basis.hwp_deg() {
            let off = (self.hwp_deg - expected).rem_euclid(90.0);
            if off > 1e-9 && 90.0 - off > 1e-9 {
                return Err(Error::invalid(
                    "hwp_deg",
                    format!(
                        "basis {} requires {expected} deg (mod 90), got {}",
                        self.basis, self.hwp_deg
                    ),
                ));
            }
        }
        Ok(())
    }

    fn checked_hwp_rad(&self) -> Result<f64> {
        ensure_finite("hwp_deg", self.hwp_deg)?;
        if self.qwp_deg != 0.0 {
            return Err(Error::invalid(
                "qwp_deg",
                format!(
                    "{} deg: only a zero quarter-wave plate is modeled",
                    self.qwp_deg
                ),
            ));
        }
        Ok(self.hwp_deg.to_radians())
    }
}

/// Probabilities of the four PBS outcome combinations for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOutcome {
    pub pass_pass: f64,
    pub pass_fail: f64,
    pub fail_pass: f64,
    pub fail_fail: f64,
}

impl JointOutcome {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.pass_pass,
            self.pass_fail,
            self.fail_pass,
            self.fail_fail,
        ]
    }
}

fn correlation_term(
    state: &WernerState,
    signal: &AnalyzerSetting,
    idler: &AnalyzerSetting,
) -> Result<f64> {
    let ts = signal.checked_hwp_rad()?;
    let ti = idler.checked_hwp_rad()?;
    // HWP at theta maps onto linear polarization at 2 theta; the Bell state's
    // correlation goes as cos 2(2 theta_s - 2 theta_i).
    Ok(state.visibility * (4.0 * (ts - ti)).cos())
}

/// Probability that both photons leave through the transmitted PBS ports.
pub fn coincidence_probability(
    state: &WernerState,
    signal: &AnalyzerSetting,
    idler: &AnalyzerSetting,
) -> Result<f64> {
    Ok(0.25 * (1.0 + correlation_term(state, signal, idler)?))
}

pub fn joint_outcome_distribution(
    state: &WernerState,
    signal: &AnalyzerSetting,
    idler: &AnalyzerSetting,
) -> Result<JointOutcome> {
    let c = correlation_term(state, signal, idler)?;
    let same = 0.25 * (1.0 + c);
    let diff = 0.25 * (1.0 - c);
    Ok(JointOutcome {
        pass_pass: same,
        pass_fail: diff,
        fail_pass: diff,
        fail_fail: same,
    })
}

/// Fidelity implied by a coincidence-to-accidentals ratio, `CAR / (CAR + 1)`.
pub fn car_to_fidelity(car: f64) -> Result<f64> {
    if car.is_nan() || car < 0.0 {
        return Err(Error::invalid("car", format!("{car} must be nonnegative")));
    }
    if car.is_infinite() {
        return Ok(1.0);
    }
    Ok(car / (car + 1.0))
}

/// Overlap of a Werner state with the target Bell state, `(1 + 3V) / 4`.
pub fn werner_fidelity(state: &WernerState) -> f64 {
    (1.0 + 3.0 * state.visibility) / 4.0
}

/// Inverse of [`werner_fidelity`]; clamps to the physical range.
pub fn visibility_for_fidelity(fidelity: f64) -> f64 {
    ((4.0 * fidelity - 1.0) / 3.0).clamp(0.0, 1.0)
}

/// Werner fidelity of the mean of the rectilinear and diagonal visibilities.
pub fn fidelity_from_visibilities(v_hv: f64, v_da: f64) -> Result<f64> {
    ensure_unit("v_hv", v_hv)?;
    ensure_unit("v_da", v_da)?;
    Ok((1.0 + 3.0 * 0.5 * (v_hv + v_da)) / 4.0)
}

/// Temporal spread in ps of a band of width `bandwidth_nm` after `length_km`
/// of fiber with dispersion `dispersion` ps/(nm km).
pub fn dispersion_spread(bandwidth_nm: f64, dispersion: f64, length_km: f64) -> f64 {
    bandwidth_nm * dispersion * length_km
}

/// Residual spread when a lumped compensator of `dcm_ps_per_nm` acts on the
/// same band as `fiber_ps_per_nm` of accumulated fiber dispersion.
pub fn compensated_spread(bandwidth_nm: f64, fiber_ps_per_nm: f64, dcm_ps_per_nm: f64) -> f64 {
    (bandwidth_nm * (fiber_ps_per_nm + dcm_ps_per_nm)).abs()
}

pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmission_to_db(transmission: f64) -> f64 {
    -10.0 * transmission.log10()
}

/// `rate * 10^(-loss/10)`.
pub fn attenuate_rate(rate: f64, loss_db: f64) -> f64 {
    rate * db_to_transmission(loss_db)
}

/// Rate of uncorrelated coincidences between two Poisson streams for a
/// window of total width `window_ps`.
pub fn expected_accidentals(singles_a: f64, singles_b: f64, window_ps: f64) -> f64 {
    singles_a * singles_b * window_ps * 1e-12
}

/// Idler wavelength fixed by `2 w_p = w_s + w_i`.
pub fn conjugate_wavelength(pump_nm: f64, signal_nm: f64) -> f64 {
    1.0 / (2.0 / pump_nm - 1.0 / signal_nm)
}

/// Lumped idler-arm dispersion that cancels `signal_ps_per_nm` of signal-arm
/// dispersion for energy-anticorrelated pairs around `signal_nm`.
pub fn matched_dcm_dispersion(pump_nm: f64, signal_nm: f64, signal_ps_per_nm: f64) -> f64 {
    let idler_nm = conjugate_wavelength(pump_nm, signal_nm);
    // d(lambda_i)/d(lambda_s) = -(lambda_i / lambda_s)^2
    let slope = (idler_nm / signal_nm).powi(2);
    -signal_ps_per_nm / slope
}

/// One deployed or patch-cord fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub reference_wavelength_nm: f64,
    pub base_delay_ps: f64,
    #[serde(default)]
    pub background_rate_cps: f64,
    #[serde(default)]
    pub drift_rate_deg_per_h: f64,
    /// OTDR-measured span loss; overrides `length * attenuation` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_loss_db: Option<f64>,
    /// Lumped loss of the local optics on this arm (couplers, filters,
    /// analyzer), outside the span itself.
    #[serde(default)]
    pub insertion_loss_db: f64,
}

impl FiberSpec {
    /// A lossless, dispersionless zero-length link.
    pub fn patch_cord(reference_wavelength_nm: f64) -> Self {
        Self {
            length_km: 0.0,
            attenuation_db_per_km: 0.0,
            dispersion_ps_per_nm_km: 0.0,
            reference_wavelength_nm,
            base_delay_ps: 0.0,
            background_rate_cps: 0.0,
            drift_rate_deg_per_h: 0.0,
            measured_loss_db: None,
            insertion_loss_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("length_km", self.length_km)?;
        ensure_nonneg("attenuation_db_per_km", self.attenuation_db_per_km)?;
        ensure_finite("dispersion_ps_per_nm_km", self.dispersion_ps_per_nm_km)?;
        ensure_finite("reference_wavelength_nm", self.reference_wavelength_nm)?;
        if self.reference_wavelength_nm <= 0.0 {
            return Err(Error::invalid(
                "reference_wavelength_nm",
                "must be positive",
            ));
        }
        ensure_nonneg("base_delay_ps", self.base_delay_ps)?;
        ensure_nonneg("background_rate_cps", self.background_rate_cps)?;
        ensure_nonneg("drift_rate_deg_per_h", self.drift_rate_deg_per_h)?;
        if let Some(loss) = self.measured_loss_db {
            ensure_nonneg("measured_loss_db", loss)?;
        }
        ensure_nonneg("insertion_loss_db", self.insertion_loss_db)
    }

    pub fn span_loss_db(&self) -> f64 {
        self.measured_loss_db
            .unwrap_or(self.length_km * self.attenuation_db_per_km)
    }

    pub fn total_loss_db(&self) -> f64 {
        self.span_loss_db() + self.insertion_loss_db
    }

    pub fn transmission(&self) -> f64 {
        db_to_transmission(self.total_loss_db())
    }

    /// Accumulated dispersion of the span in ps/nm.
    pub fn accumulated_dispersion(&self) -> f64 {
        self.dispersion_ps_per_nm_km * self.length_km
    }

    /// Transit time in ps for a photon at `wavelength_nm`.
    pub fn transit_delay_ps(&self, wavelength_nm: f64) -> f64 {
        self.base_delay_ps
            + self.accumulated_dispersion() * (wavelength_nm - self.reference_wavelength_nm)
    }

    /// Polarization rotation accumulated `hours` into the run.
    pub fn drift_deg(&self, hours: f64) -> f64 {
        self.drift_rate_deg_per_h * hours
    }
}

/// Lumped dispersion-compensation module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcmSpec {
    pub total_dispersion_ps_per_nm: f64,
    pub insertion_loss_db: f64,
}

impl DcmSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "total_dispersion_ps_per_nm",
            self.total_dispersion_ps_per_nm,
        )?;
        ensure_nonneg("insertion_loss_db", self.insertion_loss_db)
    }

    pub fn transmission(&self) -> f64 {
        db_to_transmission(self.insertion_loss_db)
    }

    pub fn delay_ps(&self, wavelength_nm: f64, reference_nm: f64) -> f64 {
        self.total_dispersion_ps_per_nm * (wavelength_nm - reference_nm)
    }
}

/// Single-photon detector plus time-tagger input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub channel: u32,
    pub efficiency: f64,
    pub jitter_sigma_ps: f64,
    #[serde(default)]
    pub dark_rate_cps: f64,
    #[serde(default)]
    pub dead_time_ps: u64,
    #[serde(default = "default_resolution")]
    pub resolution_ps: u64,
}

fn default_resolution() -> u64 {
    1
}

impl DetectorSpec {
    pub fn ideal(channel: u32) -> Self {
        Self {
            channel,
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            dark_rate_cps: 0.0,
            dead_time_ps: 0,
            resolution_ps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_unit("efficiency", self.efficiency)?;
        ensure_nonneg("jitter_sigma_ps", self.jitter_sigma_ps)?;
        ensure_nonneg("dark_rate_cps", self.dark_rate_cps)?;
        if self.resolution_ps < 1 {
            return Err(Error::invalid("resolution_ps", "must be at least 1 ps"));
        }
        Ok(())
    }

    /// Per-detector sigma when a combined jitter is split evenly in
    /// quadrature between two detectors.
    pub fn split_jitter(combined_sigma_ps: f64) -> f64 {
        combined_sigma_ps / std::f64::consts::SQRT_2
    }
}

/// Windowed coincidence count together with its accidental estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceResult {
    pub coincidences: u64,
    /// Mean count over the accidental offsets (integral for a single offset).
    pub accidentals: f64,
    pub window_ps: u64,
    pub delay_ps: i64,
    pub integration_s: f64,
    pub car: f64,
    /// Set when fewer than one accidental was seen and `car` is therefore
    /// computed against a floor of one.
    pub car_lower_bound: bool,
}

impl CoincidenceResult {
    pub fn new(
        coincidences: u64,
        accidentals: f64,
        window_ps: u64,
        delay_ps: i64,
        integration_s: f64,
    ) -> Self {
        let car_lower_bound = accidentals < 1.0;
        let car = coincidences as f64 / accidentals.max(1.0);
        Self {
            coincidences,
            accidentals,
            window_ps,
            delay_ps,
            integration_s,
            car,
            car_lower_bound,
        }
    }

    pub fn coincidence_rate(&self) -> f64 {
        if self.integration_s > 0.0 {
            self.coincidences as f64 / self.integration_s
        } else {
            0.0
        }
    }

    pub fn accidental_rate(&self) -> f64 {
        if self.integration_s > 0.0 {
            self.accidentals / self.integration_s
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn round3(x: f64) -> f64 {
        (x * 1000.0).round() / 1000.0
    }

    #[test]
    fn coincidence_probability_examples() {
        let pure = WernerState::pure();
        let h = AnalyzerSetting::free(0.0);
        assert_abs_diff_eq!(
            coincidence_probability(&pure, &h, &h).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let v = AnalyzerSetting::free(45.0);
        assert_abs_diff_eq!(
            coincidence_probability(&pure, &h, &v).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let s = WernerState::new(0.9).unwrap();
        let p = coincidence_probability(
            &s,
            &AnalyzerSetting::free(22.5),
            &AnalyzerSetting::free(67.5),
        )
        .unwrap();
        assert_abs_diff_eq!(p, 0.025, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_state_and_quarter_wave_plate() {
        assert!(WernerState::new(1.01).is_err());
        assert!(WernerState::new(-0.1).is_err());
        assert!(WernerState::new(f64::NAN).is_err());
        let mut qwp = AnalyzerSetting::free(0.0);
        qwp.qwp_deg = 10.0;
        let err = coincidence_probability(&WernerState::pure(), &qwp, &AnalyzerSetting::free(0.0));
        assert!(matches!(
            err,
            Err(Error::InvalidParameter {
                name: "qwp_deg",
                ..
            })
        ));
    }

    #[test]
    fn joint_outcome_examples() {
        let h = AnalyzerSetting::free(0.0);
        let j = joint_outcome_distribution(&WernerState::pure(), &h, &h).unwrap();
        assert_eq!(j.as_array(), [0.5, 0.0, 0.0, 0.5]);
        let j = joint_outcome_distribution(
            &WernerState::new(0.0).unwrap(),
            &h,
            &AnalyzerSetting::free(31.0),
        )
        .unwrap();
        assert_eq!(j.as_array(), [0.25; 4]);
        let j = joint_outcome_distribution(
            &WernerState::new(0.5).unwrap(),
            &h,
            &AnalyzerSetting::free(22.5),
        )
        .unwrap();
        for p in j.as_array() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn car_fidelity_law() {
        assert_eq!(round3(car_to_fidelity(2.0).unwrap()), 0.667);
        assert_eq!(round3(car_to_fidelity(15.0).unwrap()), 0.938);
        assert_eq!(round3(car_to_fidelity(91.0).unwrap()), 0.989);
        assert_eq!(car_to_fidelity(0.0).unwrap(), 0.0);
        assert_eq!(car_to_fidelity(f64::INFINITY).unwrap(), 1.0);
        assert!(car_to_fidelity(-1.0).is_err());
    }

    #[test]
    fn werner_fidelity_examples() {
        assert_eq!(werner_fidelity(&WernerState::pure()), 1.0);
        assert_eq!(werner_fidelity(&WernerState::new(0.0).unwrap()), 0.25);
        assert_abs_diff_eq!(
            werner_fidelity(&WernerState::new(0.972).unwrap()),
            0.979,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(visibility_for_fidelity(0.979), 0.972, epsilon = 1e-12);
    }

    #[test]
    fn dispersion_examples() {
        assert_abs_diff_eq!(dispersion_spread(0.8, 18.0, 93.0), 1339.2, epsilon = 1e-9);
        assert_eq!(dispersion_spread(0.8, 18.0, 0.0), 0.0);
        assert_abs_diff_eq!(
            compensated_spread(0.8, 18.0 * 93.0, -1360.0),
            251.2,
            epsilon = 1e-9
        );
    }

    #[test]
    fn link_budget_arithmetic() {
        assert_abs_diff_eq!(attenuate_rate(2.8e6, 66.0), 0.70, epsilon = 0.005);
        assert_eq!(attenuate_rate(123.0, 0.0), 123.0);
        let source = 132.0 / db_to_transmission(39.7);
        assert_abs_diff_eq!(source, 1.23e6, epsilon = 0.01e6);
        assert_abs_diff_eq!(
            transmission_to_db(db_to_transmission(35.4)),
            35.4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn accidental_rate_examples() {
        assert_abs_diff_eq!(
            expected_accidentals(4.8e3, 5.6e6, 60.0),
            1.61,
            epsilon = 0.005
        );
        assert_eq!(expected_accidentals(1e9, 0.0, 60.0), 0.0);
        assert_abs_diff_eq!(
            expected_accidentals(1e5, 1e5, 1000.0),
            10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fidelity_from_visibility_examples() {
        assert_eq!(fidelity_from_visibilities(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(fidelity_from_visibilities(0.0, 0.0).unwrap(), 0.25);
        assert_abs_diff_eq!(
            fidelity_from_visibilities(0.96, 0.92).unwrap(),
            0.955,
            epsilon = 1e-12
        );
        assert!(fidelity_from_visibilities(1.2, 0.5).is_err());
    }

    #[test]
    fn energy_conservation_wavelengths() {
        let idler = conjugate_wavelength(1550.12, 1539.37);
        assert_abs_diff_eq!(idler, 1561.02, epsilon = 0.01);
        assert!((idler - 1561.01).abs() < 0.1);
        // The matched compensator is slightly stronger than the naive -D L.
        let dcm = matched_dcm_dispersion(1550.12, 1539.37, 18.0 * 93.0);
        assert!(dcm < -1600.0 && dcm > -1650.0, "{dcm}");
    }

    #[test]
    fn basis_angles_validate() {
        for b in Basis::ALL {
            AnalyzerSetting::basis(b).validate().unwrap();
        }
        let bad = AnalyzerSetting {
            hwp_deg: 10.0,
            qwp_deg: 0.0,
            basis: Basis::D,
        };
        assert!(bad.validate().is_err());
        let wrapped = AnalyzerSetting {
            hwp_deg: 112.5,
            qwp_deg: 0.0,
            basis: Basis::D,
        };
        wrapped.validate().unwrap();
    }

    #[test]
    fn coincidence_result_floors_car() {
        let r = CoincidenceResult::new(0, 0.0, 60, 0, 0.0);
        assert_eq!(r.car, 0.0);
        assert!(r.car_lower_bound);
        let r = CoincidenceResult::new(91, 1.0, 60, 0, 1.0);
        assert_eq!(r.car, 91.0);
        assert!(!r.car_lower_bound);
    }

    proptest! {
        #[test]
        fn joint_outcome_normalized(v in 0.0f64..=1.0, a in -720.0f64..720.0, b in -720.0f64..720.0) {
            let state = WernerState::new(v).unwrap();
            let j = joint_outcome_distribution(&state, &AnalyzerSetting::free(a), &AnalyzerSetting::free(b)).unwrap();
            let p = j.as_array();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for x in p {
                prop_assert!((-1e-15..=0.5 + 1e-15).contains(&x));
            }
            prop_assert!((p[0] + p[1] - 0.5).abs() < 1e-12);
            prop_assert!((p[0] + p[2] - 0.5).abs() < 1e-12);
        }

        #[test]
        fn coincidence_probability_symmetries(v in 0.0f64..=1.0, a in -360.0f64..360.0, b in -360.0f64..360.0) {
            let state = WernerState::new(v).unwrap();
            let p = coincidence_probability(&state, &AnalyzerSetting::free(a), &AnalyzerSetting::free(b)).unwrap();
            let shifted = coincidence_probability(&state, &AnalyzerSetting::free(a + 90.0), &AnalyzerSetting::free(b + 90.0)).unwrap();
            let swapped = coincidence_probability(&state, &AnalyzerSetting::free(b), &AnalyzerSetting::free(a)).unwrap();
            prop_assert!((p - shifted).abs() < 1e-12);
            prop_assert!((p - swapped).abs() < 1e-12);
        }

        #[test]
        fn car_fidelity_monotone(x in 0.0f64..1e6, dx in 1e-6f64..1e3) {
            let f = car_to_fidelity(x).unwrap();
            let g = car_to_fidelity(x + dx).unwrap();
            prop_assert!(g > f);
            prop_assert!(g < 1.0);
        }

        #[test]
        fn attenuation_composes(r in 0.0f64..1e9, a in 0.0f64..80.0, b in 0.0f64..80.0) {
            let two = attenuate_rate(attenuate_rate(r, a), b);
            let one = attenuate_rate(r, a + b);
            prop_assert!((two - one).abs() <= 1e-9 * one.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn spread_is_bilinear(bw in 0.0f64..5.0, d in 0.0f64..30.0, l in 0.0f64..500.0, k in 0.0f64..10.0) {
            let base = dispersion_spread(bw, d, l);
            prop_assert!((dispersion_spread(k * bw, d, l) - k * base).abs() <= 1e-9 * (1.0 + base * k));
            prop_assert!((dispersion_spread(bw, d, k * l) - k * base).abs() <= 1e-9 * (1.0 + base * k));
            prop_assert!((dispersion_spread(bw, d, l + 1.0) - base - dispersion_spread(bw, d, 1.0)).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
