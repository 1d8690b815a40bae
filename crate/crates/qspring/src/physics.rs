//! Raw physical parameters, lattice and membrane geometry solvers, derived
//! coupling/decoherence rates, and the strong-coupling condition ledger.
//!
//! Everything internal is SI with angular frequencies (rad/s). The JSON
//! config boundary accepts plain frequencies in Hz (field names suffixed
//! `_hz`) and converts by 2π in exactly one place, [`params_from_config`].
//! The membrane thermal link `kappa_th_hz` is an energy-flow rate
//! (power per energy, 1/s), not an oscillation frequency, and is used
//! directly without the 2π factor.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::numeric::{brent, golden_max};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const KB: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;

const TWO_PI: f64 = 2.0 * PI;

/// Geometry factor θ below which a lattice site is not considered usable
/// for coupling; operationalizes "can be made close to unity".
const THETA_GOOD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("{field}: must be strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("config: {0}")]
    Config(String),
}

fn require_positive(field: &'static str, value: f64) -> Result<(), PhysicsError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(PhysicsError::NonPositive { field, value });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parameters

/// Atomic parameters: mass, linewidth, the two drive wavelengths, laser
/// detuning from atomic resonance, and the vacuum Rabi frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomParams {
    pub mass_kg: f64,
    /// Atomic amplitude (half-width) decay rate γ, rad/s.
    pub gamma_rad_s: f64,
    pub lambda1_m: f64,
    pub lambda2_m: f64,
    /// Detuning δ from atomic resonance, rad/s; negative for red detuning.
    pub delta_rad_s: f64,
    /// Vacuum Rabi frequency Ω₀, rad/s.
    pub vacuum_rabi_rad_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityParams {
    pub length_m: f64,
    pub finesse: f64,
    pub waist_m: f64,
    /// Magnitude Δ of the symmetric laser detunings, rad/s.
    pub detuning_rad_s: f64,
    /// Integer q fixing the wavevector difference δk = qπ/L of the two
    /// driven longitudinal modes.
    pub mode_index_offset: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembraneParams {
    /// Effective mass M of the drum mode, kg.
    pub mass_kg: f64,
    pub omega_m_rad_s: f64,
    pub quality: f64,
    /// Amplitude reflectivity r, 0 < r < 1.
    pub reflectivity: f64,
    pub temperature_k: f64,
    /// Thermal link κ_th in 1/s so that k_B·κ_th is the thermal
    /// conductance in W/K. Not an angular frequency.
    pub kappa_th_hz: f64,
    pub side_m: f64,
    pub thickness_m: f64,
}

/// Drive strength, given either as the total circulating power over both
/// cavity modes or directly as the per-mode intracavity amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    CirculatingPowerW(f64),
    Alpha(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub atom: AtomParams,
    pub cavity: CavityParams,
    pub membrane: MembraneParams,
    pub drive: Drive,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("atom.mass_kg", self.atom.mass_kg)?;
        require_positive("atom.gamma_rad_s", self.atom.gamma_rad_s)?;
        require_positive("atom.lambda1_m", self.atom.lambda1_m)?;
        require_positive("atom.lambda2_m", self.atom.lambda2_m)?;
        require_positive("atom.vacuum_rabi_rad_s", self.atom.vacuum_rabi_rad_s)?;
        if !(self.atom.delta_rad_s < 0.0) {
            return Err(PhysicsError::Invalid {
                field: "atom.delta_rad_s",
                message: format!(
                    "must be negative (red detuning), got {}",
                    self.atom.delta_rad_s
                ),
            });
        }
        require_positive("cavity.length_m", self.cavity.length_m)?;
        require_positive("cavity.finesse", self.cavity.finesse)?;
        require_positive("cavity.waist_m", self.cavity.waist_m)?;
        require_positive("cavity.detuning_rad_s", self.cavity.detuning_rad_s)?;
        if self.cavity.mode_index_offset == 0 {
            return Err(PhysicsError::Invalid {
                field: "cavity.mode_index_offset",
                message: "must be at least 1".into(),
            });
        }
        require_positive("membrane.mass_kg", self.membrane.mass_kg)?;
        require_positive("membrane.omega_m_rad_s", self.membrane.omega_m_rad_s)?;
        require_positive("membrane.quality", self.membrane.quality)?;
        let r = self.membrane.reflectivity;
        if !(r > 0.0 && r < 1.0) {
            return Err(PhysicsError::Invalid {
                field: "membrane.reflectivity",
                message: format!("must lie in (0, 1), got {r}"),
            });
        }
        if self.membrane.temperature_k < 0.0 {
            return Err(PhysicsError::Invalid {
                field: "membrane.temperature_k",
                message: "must be non-negative".into(),
            });
        }
        require_positive("membrane.kappa_th_hz", self.membrane.kappa_th_hz)?;
        require_positive("membrane.side_m", self.membrane.side_m)?;
        require_positive("membrane.thickness_m", self.membrane.thickness_m)?;
        match self.drive {
            Drive::CirculatingPowerW(p) => require_positive("drive.circulating_power_w", p)?,
            Drive::Alpha(a) => require_positive("drive.alpha", a)?,
        }
        Ok(())
    }

    /// Wavevectors of the two driven modes, 1/m.
    pub fn wavevectors(&self) -> (f64, f64) {
        (TWO_PI / self.atom.lambda1_m, TWO_PI / self.atom.lambda2_m)
    }
}

// ---------------------------------------------------------------------------
// JSON config boundary (frequencies in Hz)

/// JSON mirror of [`SystemParams`] with plain frequencies in Hz; see the
/// module docs for the conversion rule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub atom: ConfigAtom,
    pub cavity: ConfigCavity,
    pub membrane: ConfigMembrane,
    pub drive: ConfigDrive,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigAtom {
    pub mass_kg: f64,
    pub gamma_hz: f64,
    pub lambda1_m: f64,
    pub lambda2_m: f64,
    pub delta_hz: f64,
    pub vacuum_rabi_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigCavity {
    pub length_m: f64,
    pub finesse: f64,
    pub waist_m: f64,
    pub detuning_hz: f64,
    pub mode_index_offset: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigMembrane {
    pub mass_kg: f64,
    pub omega_m_hz: f64,
    pub quality: f64,
    pub reflectivity: f64,
    pub temperature_k: f64,
    pub kappa_th_hz: f64,
    pub side_m: f64,
    pub thickness_m: f64,
}

/// Exactly one of the two fields must be present.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigDrive {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circulating_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// The single Hz → rad/s conversion site.
pub fn params_from_config(cfg: &Config) -> Result<SystemParams, PhysicsError> {
    let drive = match (cfg.drive.circulating_power_w, cfg.drive.alpha) {
        (Some(p), None) => Drive::CirculatingPowerW(p),
        (None, Some(a)) => Drive::Alpha(a),
        _ => {
            return Err(PhysicsError::Invalid {
                field: "drive",
                message: "exactly one of circulating_power_w / alpha must be set".into(),
            })
        }
    };
    let params = SystemParams {
        atom: AtomParams {
            mass_kg: cfg.atom.mass_kg,
            gamma_rad_s: cfg.atom.gamma_hz * TWO_PI,
            lambda1_m: cfg.atom.lambda1_m,
            lambda2_m: cfg.atom.lambda2_m,
            delta_rad_s: cfg.atom.delta_hz * TWO_PI,
            vacuum_rabi_rad_s: cfg.atom.vacuum_rabi_hz * TWO_PI,
        },
        cavity: CavityParams {
            length_m: cfg.cavity.length_m,
            finesse: cfg.cavity.finesse,
            waist_m: cfg.cavity.waist_m,
            detuning_rad_s: cfg.cavity.detuning_hz * TWO_PI,
            mode_index_offset: cfg.cavity.mode_index_offset,
        },
        membrane: MembraneParams {
            mass_kg: cfg.membrane.mass_kg,
            omega_m_rad_s: cfg.membrane.omega_m_hz * TWO_PI,
            quality: cfg.membrane.quality,
            reflectivity: cfg.membrane.reflectivity,
            temperature_k: cfg.membrane.temperature_k,
            kappa_th_hz: cfg.membrane.kappa_th_hz,
            side_m: cfg.membrane.side_m,
            thickness_m: cfg.membrane.thickness_m,
        },
        drive,
    };
    params.validate()?;
    Ok(params)
}

pub fn params_to_config(p: &SystemParams) -> Config {
    let (power, alpha) = match p.drive {
        Drive::CirculatingPowerW(w) => (Some(w), None),
        Drive::Alpha(a) => (None, Some(a)),
    };
    Config {
        atom: ConfigAtom {
            mass_kg: p.atom.mass_kg,
            gamma_hz: p.atom.gamma_rad_s / TWO_PI,
            lambda1_m: p.atom.lambda1_m,
            lambda2_m: p.atom.lambda2_m,
            delta_hz: p.atom.delta_rad_s / TWO_PI,
            vacuum_rabi_hz: p.atom.vacuum_rabi_rad_s / TWO_PI,
        },
        cavity: ConfigCavity {
            length_m: p.cavity.length_m,
            finesse: p.cavity.finesse,
            waist_m: p.cavity.waist_m,
            detuning_hz: p.cavity.detuning_rad_s / TWO_PI,
            mode_index_offset: p.cavity.mode_index_offset,
        },
        membrane: ConfigMembrane {
            mass_kg: p.membrane.mass_kg,
            omega_m_hz: p.membrane.omega_m_rad_s / TWO_PI,
            quality: p.membrane.quality,
            reflectivity: p.membrane.reflectivity,
            temperature_k: p.membrane.temperature_k,
            kappa_th_hz: p.membrane.kappa_th_hz,
            side_m: p.membrane.side_m,
            thickness_m: p.membrane.thickness_m,
        },
        drive: ConfigDrive {
            circulating_power_w: power,
            alpha,
        },
    }
}

pub fn parse_config_json(text: &str) -> Result<SystemParams, PhysicsError> {
    let cfg: Config =
        serde_json::from_str(text).map_err(|e| PhysicsError::Config(e.to_string()))?;
    params_from_config(&cfg)
}

// ---------------------------------------------------------------------------
// Cavity basics

/// Cavity amplitude decay rate κ = πc/(2FL) and single-atom cooperativity
/// C = Ω₀²/(κγ).
pub fn kappa_and_cooperativity(params: &SystemParams) -> Result<(f64, f64), PhysicsError> {
    require_positive("cavity.finesse", params.cavity.finesse)?;
    require_positive("cavity.length_m", params.cavity.length_m)?;
    require_positive("atom.vacuum_rabi_rad_s", params.atom.vacuum_rabi_rad_s)?;
    require_positive("atom.gamma_rad_s", params.atom.gamma_rad_s)?;
    let kappa = PI * C_LIGHT / (2.0 * params.cavity.finesse * params.cavity.length_m);
    let coop = params.atom.vacuum_rabi_rad_s.powi(2) / (kappa * params.atom.gamma_rad_s);
    Ok((kappa, coop))
}

// ---------------------------------------------------------------------------
// Lattice geometry

/// A trapping site of the combined two-color lattice
/// u(x) = sin²(k₁x) + sin²(k₂x) = 1 − cos(kx)·cos(δk·x).
///
/// For red atomic detuning the optical potential is ħU₀α²u(x) with U₀ < 0,
/// so traps sit at intensity maxima (u'' < 0); `curvature` stores |u''(x̄)|,
/// the positive harmonic coefficient of the potential well.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeSite {
    pub x_at_m: f64,
    /// Geometry factor θ = |sin(2k₁x̄)| ∈ (0, 1].
    pub theta: f64,
    /// Geometry factor ξ = k₁²·u(x̄)/u₁'(x̄)² = u(x̄)/θ².
    pub xi: f64,
    /// |u''(x̄)| in 1/m².
    pub curvature: f64,
    pub site_index: u32,
}

fn lattice_u(k: f64, dk: f64, x: f64) -> f64 {
    1.0 - (k * x).cos() * (dk * x).cos()
}

fn lattice_up(k: f64, dk: f64, x: f64) -> f64 {
    k * (k * x).sin() * (dk * x).cos() + dk * (k * x).cos() * (dk * x).sin()
}

fn lattice_upp(k: f64, dk: f64, x: f64) -> f64 {
    (k * k + dk * dk) * (k * x).cos() * (dk * x).cos()
        - 2.0 * k * dk * (k * x).sin() * (dk * x).sin()
}

/// Solves for a trapping site of the combined lattice in the branch nearest
/// `δk·x = site_index·π`.
///
/// `k = k₁ + k₂` and `delta_k = k₁ − k₂` are the sum and difference
/// wavevectors. Stationary points satisfy k·tan(kx) = −δk·tan(δk·x); each
/// is found by bracketed root finding of u'(x) to relative tolerance 1e-12.
/// Among the trapping candidates (u'' < 0) of the branch the shallowest
/// site with θ ≥ 0.9 is returned (falling back to the largest θ, and to the
/// neighboring branch if the window holds no trap at all).
pub fn solve_lattice_site(
    k: f64,
    delta_k: f64,
    site_index: u32,
) -> Result<LatticeSite, PhysicsError> {
    require_positive("k", k)?;
    if !(delta_k > 0.0 && delta_k < k) {
        return Err(PhysicsError::Invalid {
            field: "delta_k",
            message: format!("must satisfy 0 < delta_k < k (got {delta_k} vs k = {k})"),
        });
    }
    if site_index == 0 {
        return Err(PhysicsError::Invalid {
            field: "site_index",
            message: "must be at least 1".into(),
        });
    }
    let k1 = 0.5 * (k + delta_k);
    for attempt in [0i64, 1, -1, 2, -2] {
        let n = site_index as i64 + attempt;
        if n < 1 {
            continue;
        }
        let lo = (n as f64 - 0.5) * PI / delta_k;
        let hi = (n as f64 + 0.5) * PI / delta_k;
        let mut candidates = Vec::new();
        let grid = ((16.0 * k / delta_k).ceil() as usize).max(2000);
        let mut prev_x = lo;
        let mut prev_f = lattice_up(k, delta_k, lo);
        for i in 1..=grid {
            let x = lo + (hi - lo) * i as f64 / grid as f64;
            let f = lattice_up(k, delta_k, x);
            if prev_f == 0.0 || prev_f.signum() != f.signum() {
                if let Some(mut root) = brent(|x| lattice_up(k, delta_k, x), prev_x, x, 1e-13) {
                    // Newton polish; u'' is analytic so a few steps reach
                    // machine precision on the stationarity residual.
                    for _ in 0..4 {
                        let d2 = lattice_upp(k, delta_k, root);
                        if d2 == 0.0 {
                            break;
                        }
                        let step = lattice_up(k, delta_k, root) / d2;
                        if !step.is_finite() || step.abs() > (x - prev_x) {
                            break;
                        }
                        root -= step;
                    }
                    if lattice_upp(k, delta_k, root) < 0.0 {
                        candidates.push(root);
                    }
                }
            }
            prev_x = x;
            prev_f = f;
        }
        if candidates.is_empty() {
            continue;
        }
        let site_at = |x: f64| {
            let theta_signed = (2.0 * k1 * x).sin();
            let theta = theta_signed.abs();
            let xi = lattice_u(k, delta_k, x) / (theta_signed * theta_signed);
            LatticeSite {
                x_at_m: x,
                theta,
                xi,
                curvature: lattice_upp(k, delta_k, x).abs(),
                site_index,
            }
        };
        let sites: Vec<LatticeSite> = candidates.iter().map(|&x| site_at(x)).collect();
        let best = sites
            .iter()
            .filter(|s| s.theta >= THETA_GOOD)
            .min_by(|a, b| a.curvature.total_cmp(&b.curvature))
            .or_else(|| sites.iter().max_by(|a, b| a.theta.total_cmp(&b.theta)));
        if let Some(site) = best {
            return Ok(site.clone());
        }
    }
    Err(PhysicsError::Invalid {
        field: "site_index",
        message: format!("no trapping site found near delta_k*x = {site_index}*pi"),
    })
}

// ---------------------------------------------------------------------------
// Membrane geometry

/// Coupling geometry factors f_i = 2r·sin(2kᵢx_m)/√(1 − r²cos²(2kᵢx_m)) of a
/// membrane of amplitude reflectivity `r` placed at `x_m`.
pub fn membrane_geometry(r: f64, k1: f64, k2: f64, x_m: f64) -> Result<(f64, f64), PhysicsError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(PhysicsError::Invalid {
            field: "reflectivity",
            message: format!("must lie in (0, 1), got {r}"),
        });
    }
    require_positive("k1", k1)?;
    require_positive("k2", k2)?;
    let f = |ki: f64| {
        let c = (2.0 * ki * x_m).cos();
        2.0 * r * (2.0 * ki * x_m).sin() / (1.0 - r * r * c * c).sqrt()
    };
    Ok((f(k1), f(k2)))
}

/// Membrane placement result: the position together with the geometry
/// factors achieved there.
#[derive(Debug, Clone, Serialize)]
pub struct MembranePlacement {
    pub x_m_m: f64,
    pub f1: f64,
    pub f2: f64,
}

/// Picks the membrane position maximizing min(f₁, f₂) over `[0,
/// search_window]` by dense scan plus golden-section refinement.
pub fn choose_membrane_position(
    r: f64,
    k1: f64,
    k2: f64,
    search_window: f64,
) -> Result<MembranePlacement, PhysicsError> {
    let period = PI / k1.min(k2);
    if search_window < period {
        return Err(PhysicsError::Invalid {
            field: "search_window",
            message: format!("must span at least one optical period ({period:.3e} m)"),
        });
    }
    let objective = |x: f64| {
        let (f1, f2) = membrane_geometry(r, k1, k2, x).expect("validated above");
        f1.min(f2)
    };
    membrane_geometry(r, k1, k2, 0.0)?;
    let n = 8192;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = search_window * i as f64 / n as f64;
        let v = objective(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let h = search_window / n as f64;
    let lo = (best_i as f64 - 1.0).max(0.0) * h;
    let hi = ((best_i + 1) as f64 * h).min(search_window);
    let (x_m, _) = golden_max(objective, lo, hi, 1e-13);
    let (f1, f2) = membrane_geometry(r, k1, k2, x_m)?;
    Ok(MembranePlacement { x_m_m: x_m, f1, f2 })
}

// ---------------------------------------------------------------------------
// Derived rates

/// Every derived rate and factor of the coupled system, plus the resolved
/// input configuration it was computed from.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedRates {
    /// Resolved inputs in the external (Hz) convention.
    pub config: Config,
    #[serde(skip_serializing)]
    pub params: SystemParams,
    pub kappa_rad_s: f64,
    pub cooperativity: f64,
    /// Light shift per photon U₀ = Ω₀²/δ, rad/s; negative for red detuning.
    pub u0_rad_s: f64,
    /// Lamb-Dicke parameter η = k₁·ℓ_at.
    pub eta: f64,
    pub l_at_m: f64,
    pub l_m_m: f64,
    /// Per-mode intracavity amplitude (real).
    pub alpha: f64,
    pub omega_at_rad_s: f64,
    pub g_atc_rad_s: f64,
    pub g_mc_rad_s: f64,
    pub f1: f64,
    pub f2: f64,
    pub x_m_m: f64,
    pub g_rad_s: f64,
    pub gamma_c_plus_rad_s: f64,
    pub gamma_c_minus_rad_s: f64,
    /// Mixing angle φ of the cavity decoherence channels, tanφ = g_atc/g_mc.
    pub phi: f64,
    pub gamma_at_rad_s: f64,
    /// Natural membrane linewidth γ_m = ω_m/Q.
    pub gamma_m_natural_rad_s: f64,
    pub n_bar: f64,
    /// Thermal decoherence rate Γ_m = γ_m·n̄.
    pub gamma_m_rad_s: f64,
    pub p_c_w: f64,
    pub p_a_w: f64,
    pub delta_t_k: f64,
}

/// Mean thermal occupation at temperature `t_k` and frequency `omega`.
///
/// The high-temperature form k_BT/(ħω) keeps Γ_m = γ_m·n̄ ≈ k_BT/(ħQ)
/// exactly; the exact Bose factor is available for cross-checks.
pub fn thermal_occupation(t_k: f64, omega_rad_s: f64, exact: bool) -> f64 {
    if t_k <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega_rad_s / (KB * t_k);
    if exact {
        1.0 / (x.exp() - 1.0)
    } else {
        1.0 / x
    }
}

/// Effective cavity-mediated atom-membrane coupling rate G.
pub fn effective_coupling_g(g_atc: f64, g_mc: f64, delta: f64, omega_m: f64, kappa: f64) -> f64 {
    let lorentz = |d: f64| d / (kappa * kappa + d * d);
    2.0 * g_atc * g_mc * (lorentz(delta + omega_m) + lorentz(delta - omega_m))
}

/// Cavity-induced decoherence rates Γ_c± and the channel mixing angle φ.
pub fn cavity_decoherence(
    g_atc: f64,
    g_mc: f64,
    delta: f64,
    omega_m: f64,
    kappa: f64,
) -> (f64, f64, f64) {
    let s = g_atc * g_atc + g_mc * g_mc;
    let gamma = |d: f64| 2.0 * kappa * s / (kappa * kappa + d * d);
    let phi = g_atc.atan2(g_mc);
    (gamma(delta + omega_m), gamma(delta - omega_m), phi)
}

/// Computes every derived rate from the raw parameters, a solved lattice
/// site, and the membrane position.
pub fn derive_rates(
    params: &SystemParams,
    site: &LatticeSite,
    x_m: f64,
) -> Result<DerivedRates, PhysicsError> {
    params.validate()?;
    let (kappa, coop) = kappa_and_cooperativity(params)?;
    let (k1, k2) = params.wavevectors();
    let omega1 = TWO_PI * C_LIGHT / params.atom.lambda1_m;
    let cav_l = params.cavity.length_m;

    // Per-mode photon number from the overall circulating power,
    // P_c = ħω₁cα²/L, or the inverse if α is given directly.
    let (alpha2, p_c) = match params.drive {
        Drive::CirculatingPowerW(p) => (p * cav_l / (HBAR * omega1 * C_LIGHT), p),
        Drive::Alpha(a) => (a * a, HBAR * omega1 * C_LIGHT * a * a / cav_l),
    };
    if !(alpha2 > 0.0) {
        return Err(PhysicsError::NonPositive {
            field: "drive",
            value: alpha2,
        });
    }
    let alpha = alpha2.sqrt();

    let l_m = (HBAR / (2.0 * params.membrane.mass_kg * params.membrane.omega_m_rad_s)).sqrt();
    let u0 = params.atom.vacuum_rabi_rad_s.powi(2) / params.atom.delta_rad_s;
    if site.curvature <= 0.0 {
        return Err(PhysicsError::Invalid {
            field: "site.curvature",
            message: "trap curvature must be positive (site is not a potential minimum)".into(),
        });
    }
    // Trap frequency of the potential well ħ|U₀|α²·u(x) around x̄_at.
    let omega_at2 = HBAR * u0.abs() * alpha2 * site.curvature / params.atom.mass_kg;
    let omega_at = omega_at2.sqrt();
    let l_at = (HBAR / (2.0 * params.atom.mass_kg * omega_at)).sqrt();
    let eta = k1 * l_at;
    let g_atc = u0.abs() * alpha * eta * site.theta;

    let (f1, f2) = membrane_geometry(params.membrane.reflectivity, k1, k2, x_m)?;
    let g_mc = (l_m / cav_l) * omega1 * f1 * alpha;

    let gamma_at =
        params.atom.gamma_rad_s * (g_atc / params.atom.vacuum_rabi_rad_s).powi(2) * site.xi;
    let gamma_m_natural = params.membrane.omega_m_rad_s / params.membrane.quality;
    let n_bar = thermal_occupation(
        params.membrane.temperature_k,
        params.membrane.omega_m_rad_s,
        false,
    );
    let gamma_m = gamma_m_natural * n_bar;

    let delta_c = params.cavity.detuning_rad_s;
    let omega_m = params.membrane.omega_m_rad_s;
    let g = effective_coupling_g(g_atc, g_mc, delta_c, omega_m, kappa);
    let (gc_plus, gc_minus, phi) = cavity_decoherence(g_atc, g_mc, delta_c, omega_m, kappa);

    let p_a = TWO_PI / params.cavity.finesse * p_c;
    let delta_t = p_a / (KB * params.membrane.kappa_th_hz);

    Ok(DerivedRates {
        config: params_to_config(params),
        params: params.clone(),
        kappa_rad_s: kappa,
        cooperativity: coop,
        u0_rad_s: u0,
        eta,
        l_at_m: l_at,
        l_m_m: l_m,
        alpha,
        omega_at_rad_s: omega_at,
        g_atc_rad_s: g_atc,
        g_mc_rad_s: g_mc,
        f1,
        f2,
        x_m_m: x_m,
        g_rad_s: g,
        gamma_c_plus_rad_s: gc_plus,
        gamma_c_minus_rad_s: gc_minus,
        phi,
        gamma_at_rad_s: gamma_at,
        gamma_m_natural_rad_s: gamma_m_natural,
        n_bar,
        gamma_m_rad_s: gamma_m,
        p_c_w: p_c,
        p_a_w: p_a,
        delta_t_k: delta_t,
    })
}

/// Per-mode amplitude that puts the trap in resonance with the membrane,
/// ω_at(α) = ω_m. Since g_atc·g_mc ∝ α²·η·θ·f₁ with η ∝ 1/√ω_at, holding
/// the resonance while rescaling the drive leaves G unchanged.
pub fn alpha_for_resonance(params: &SystemParams, site: &LatticeSite) -> Result<f64, PhysicsError> {
    params.validate()?;
    if site.curvature <= 0.0 {
        return Err(PhysicsError::Invalid {
            field: "site.curvature",
            message: "trap curvature must be positive".into(),
        });
    }
    let u0 = params.atom.vacuum_rabi_rad_s.powi(2) / params.atom.delta_rad_s;
    let alpha2 = params.atom.mass_kg * params.membrane.omega_m_rad_s.powi(2)
        / (HBAR * u0.abs() * site.curvature);
    Ok(alpha2.sqrt())
}

// ---------------------------------------------------------------------------
// Condition ledger

/// Pass thresholds for the strong-coupling conditions. Every check passes
/// when its ratio is at least the configured threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// Δ/κ (far off-resonant drive).
    pub delta_over_kappa: f64,
    /// Δ/ω_m (detuning clear of the mechanical sideband).
    pub delta_over_omega_m: f64,
    /// Balanced-coupling combination; proximity to 1 is the design aim, the
    /// threshold bounds it from below.
    pub balance: f64,
    /// 4κC/Δ (cooperativity margin).
    pub coop_margin: f64,
    /// Thermal-link condition normalized by Δ/κ; ≥ 1 means satisfied.
    pub thermal_margin: f64,
    /// G over each decoherence rate.
    pub g_ratios: f64,
    /// G ratio above which the regime is classified "strong".
    pub strong: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        ConditionThresholds {
            delta_over_kappa: 5.0,
            delta_over_omega_m: 5.0,
            balance: 0.2,
            coop_margin: 5.0,
            thermal_margin: 1.0,
            g_ratios: 5.0,
            strong: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionEntry {
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ConditionEntry {
    fn new(ratio: f64, threshold: f64) -> Self {
        ConditionEntry {
            ratio,
            threshold,
            pass: ratio >= threshold,
        }
    }
}

/// The strong-coupling condition ledger.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub delta_over_kappa: ConditionEntry,
    pub delta_over_omega_m: ConditionEntry,
    pub balance: ConditionEntry,
    pub coop_margin: ConditionEntry,
    pub thermal_margin: ConditionEntry,
    pub g_over_gamma_c_plus: ConditionEntry,
    pub g_over_gamma_c_minus: ConditionEntry,
    pub g_over_gamma_at: ConditionEntry,
    pub g_over_gamma_m: ConditionEntry,
    /// "strong" when every G ratio clears the strong threshold, "marginal"
    /// when every one clears the base threshold, "weak" otherwise.
    pub regime: String,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.delta_over_kappa.pass
            && self.delta_over_omega_m.pass
            && self.balance.pass
            && self.coop_margin.pass
            && self.thermal_margin.pass
            && self.g_over_gamma_c_plus.pass
            && self.g_over_gamma_c_minus.pass
            && self.g_over_gamma_at.pass
            && self.g_over_gamma_m.pass
    }

    pub fn g_ratios(&self) -> [f64; 4] {
        [
            self.g_over_gamma_c_plus.ratio,
            self.g_over_gamma_c_minus.ratio,
            self.g_over_gamma_at.ratio,
            self.g_over_gamma_m.ratio,
        ]
    }
}

/// Evaluates the dimensionless strong-coupling conditions.
pub fn check_conditions(rates: &DerivedRates, thresholds: &ConditionThresholds) -> ConditionReport {
    let p = &rates.params;
    let delta = p.cavity.detuning_rad_s;
    let kappa = rates.kappa_rad_s;
    let omega1 = TWO_PI * C_LIGHT / p.atom.lambda1_m;
    let r = p.membrane.reflectivity;

    // Balanced-coupling condition: (4r/π)(δ/γ)(F/C)√(m/M) ≈ 1.
    let balance = (4.0 * r / PI)
        * (p.atom.delta_rad_s.abs() / p.atom.gamma_rad_s)
        * (p.cavity.finesse / rates.cooperativity)
        * (p.atom.mass_kg / p.membrane.mass_kg).sqrt();

    // Thermal-link condition: (8r²/π²)(κ_th/γ_m)(ħω₁/Mc²)F² must exceed Δ/κ.
    let thermal_lhs = (8.0 * r * r / (PI * PI))
        * (p.membrane.kappa_th_hz / rates.gamma_m_natural_rad_s)
        * (HBAR * omega1 / (p.membrane.mass_kg * C_LIGHT * C_LIGHT))
        * p.cavity.finesse.powi(2);
    let delta_over_kappa = delta / kappa;

    let g = rates.g_rad_s.abs();
    let g_ratio = |gamma: f64| if gamma > 0.0 { g / gamma } else { f64::INFINITY };
    let ratios = [
        g_ratio(rates.gamma_c_plus_rad_s),
        g_ratio(rates.gamma_c_minus_rad_s),
        g_ratio(rates.gamma_at_rad_s),
        g_ratio(rates.gamma_m_rad_s),
    ];
    let regime = if ratios.iter().all(|&x| x >= thresholds.strong) {
        "strong"
    } else if ratios.iter().all(|&x| x >= thresholds.g_ratios) {
        "marginal"
    } else {
        "weak"
    };

    ConditionReport {
        delta_over_kappa: ConditionEntry::new(delta_over_kappa, thresholds.delta_over_kappa),
        delta_over_omega_m: ConditionEntry::new(
            delta / p.membrane.omega_m_rad_s,
            thresholds.delta_over_omega_m,
        ),
        balance: ConditionEntry::new(balance, thresholds.balance),
        coop_margin: ConditionEntry::new(
            4.0 * kappa * rates.cooperativity / delta,
            thresholds.coop_margin,
        ),
        thermal_margin: ConditionEntry::new(
            thermal_lhs / delta_over_kappa,
            thresholds.thermal_margin,
        ),
        g_over_gamma_c_plus: ConditionEntry::new(ratios[0], thresholds.g_ratios),
        g_over_gamma_c_minus: ConditionEntry::new(ratios[1], thresholds.g_ratios),
        g_over_gamma_at: ConditionEntry::new(ratios[2], thresholds.g_ratios),
        g_over_gamma_m: ConditionEntry::new(ratios[3], thresholds.g_ratios),
        regime: regime.into(),
    }
}

/// Left-hand side of the thermal-link condition, exposed for reports.
pub fn thermal_condition_lhs(rates: &DerivedRates) -> f64 {
    let p = &rates.params;
    let omega1 = TWO_PI * C_LIGHT / p.atom.lambda1_m;
    let r = p.membrane.reflectivity;
    (8.0 * r * r / (PI * PI))
        * (p.membrane.kappa_th_hz / rates.gamma_m_natural_rad_s)
        * (HBAR * omega1 / (p.membrane.mass_kg * C_LIGHT * C_LIGHT))
        * p.cavity.finesse.powi(2)
}

/// Scaling of the membrane thermal link with geometry, from the
/// Laplace-equation estimate κ_th/κ'_th = (d/d')·ln(l'/l'₁)/ln(l/(2w₀)).
pub fn thermal_link_scaling(
    d: f64,
    d_ref: f64,
    l: f64,
    l_ref: f64,
    l1_ref: f64,
    w0: f64,
) -> Result<f64, PhysicsError> {
    for (name, v) in [
        ("d", d),
        ("d_ref", d_ref),
        ("l", l),
        ("l_ref", l_ref),
        ("l1_ref", l1_ref),
        ("w0", w0),
    ] {
        if !(v > 0.0) {
            return Err(PhysicsError::Invalid {
                field: "thermal_link_scaling",
                message: format!("{name} must be positive, got {v}"),
            });
        }
    }
    let ratio_ref = l_ref / l1_ref;
    let ratio = l / (2.0 * w0);
    if ratio_ref <= 1.0 || ratio <= 1.0 {
        return Err(PhysicsError::Invalid {
            field: "thermal_link_scaling",
            message: "logarithm arguments must exceed 1 (need l > 2·w0 and l_ref > l1_ref)".into(),
        });
    }
    Ok((d / d_ref) * ratio_ref.ln() / ratio.ln())
}

// ---------------------------------------------------------------------------
// Paper preset

/// The worked-example parameter set: a single Cs atom coupled through a
/// finesse-2×10⁵ microcavity to a 0.4 ng SiN membrane. The second drive
/// wavelength follows from the mode-index offset q via δk = qπ/L; the
/// operating temperature is set to the absorption-heating floor ΔT reached
/// with cryogenic precooling.
pub fn paper_preset() -> SystemParams {
    let length = 50e-6;
    let finesse = 2e5;
    let kappa = PI * C_LIGHT / (2.0 * finesse * length);
    let gamma = TWO_PI * 2.61e6;
    let vacuum_rabi = (140.0 * kappa * gamma).sqrt();
    let lambda1 = 852.34727e-9;
    let q = 6u32;
    let k1 = TWO_PI / lambda1;
    let lambda2 = TWO_PI / (k1 - q as f64 * PI / length);
    let p_c = 850e-6;
    // k_B·κ_th = 10 nW/K
    let kappa_th = 1e-8 / KB;
    let p_a = TWO_PI / finesse * p_c;
    let temperature = p_a / (KB * kappa_th);
    SystemParams {
        atom: AtomParams {
            mass_kg: 2.207e-25,
            gamma_rad_s: gamma,
            lambda1_m: lambda1,
            lambda2_m: lambda2,
            delta_rad_s: -450.0 * gamma,
            vacuum_rabi_rad_s: vacuum_rabi,
        },
        cavity: CavityParams {
            length_m: length,
            finesse,
            waist_m: 10e-6,
            detuning_rad_s: 18.0 * kappa,
            mode_index_offset: q,
        },
        membrane: MembraneParams {
            mass_kg: 0.4e-12,
            omega_m_rad_s: TWO_PI * 1.3e6,
            quality: 1e7,
            reflectivity: 0.45,
            temperature_k: temperature,
            kappa_th_hz: kappa_th,
            side_m: 100e-6,
            thickness_m: 50e-9,
        },
        drive: Drive::CirculatingPowerW(p_c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn preset_site() -> LatticeSite {
        let p = paper_preset();
        let (k1, k2) = p.wavevectors();
        solve_lattice_site(k1 + k2, k1 - k2, 1).unwrap()
    }

    fn preset_rates() -> DerivedRates {
        let p = paper_preset();
        let (k1, k2) = p.wavevectors();
        let site = preset_site();
        let placement =
            choose_membrane_position(p.membrane.reflectivity, k1, k2, PI / (k1 - k2)).unwrap();
        derive_rates(&p, &site, placement.x_m_m).unwrap()
    }

    #[test]
    fn kappa_matches_example_values() {
        let p = paper_preset();
        let (kappa, coop) = kappa_and_cooperativity(&p).unwrap();
        assert_relative_eq!(kappa, 4.712e7, max_relative = 2e-3);
        assert_relative_eq!(coop, 140.0, max_relative = 1e-12);
    }

    #[test]
    fn cooperativity_round_trip() {
        let mut p = paper_preset();
        let (kappa, _) = kappa_and_cooperativity(&p).unwrap();
        p.atom.vacuum_rabi_rad_s = (140.0 * kappa * p.atom.gamma_rad_s).sqrt();
        let (_, coop) = kappa_and_cooperativity(&p).unwrap();
        assert_relative_eq!(coop, 140.0, max_relative = 1e-12);
    }

    #[test]
    fn finesse_scaling() {
        let mut p = paper_preset();
        let (kappa, coop) = kappa_and_cooperativity(&p).unwrap();
        p.cavity.finesse *= 2.0;
        let (kappa2, coop2) = kappa_and_cooperativity(&p).unwrap();
        assert_relative_eq!(kappa2, kappa / 2.0, max_relative = 1e-14);
        assert_relative_eq!(coop2, 2.0 * coop, max_relative = 1e-14);
    }

    #[test]
    fn cooperativity_cross_check_against_mode_volume_form() {
        // C = 3λ²F/(π³w₀²) for a TEM00 mode; fixes the half-width γ choice.
        let p = paper_preset();
        let (_, coop) = kappa_and_cooperativity(&p).unwrap();
        let geometric = 3.0 * p.atom.lambda1_m.powi(2) * p.cavity.finesse
            / (PI.powi(3) * p.cavity.waist_m.powi(2));
        assert_relative_eq!(coop, geometric, max_relative = 0.01);
    }

    #[test]
    fn lattice_site_small_q_geometry() {
        // Small mode-index offsets must give usable sites: θ close to 1 and
        // ξ near its floor of 1.
        let k = TWO_PI / 852e-9;
        for q in 1..=3 {
            let dk = q as f64 * PI / 50e-6;
            let site = solve_lattice_site(k, dk, 1).unwrap();
            assert!(site.theta > 0.9, "q={q}: theta={}", site.theta);
            assert!(site.xi < 1.3, "q={q}: xi={}", site.xi);
        }
    }

    #[test]
    fn lattice_site_residual() {
        let k = TWO_PI / 852e-9;
        for (q, n) in [(1u32, 1u32), (3, 1), (6, 2)] {
            let dk = q as f64 * PI / 50e-6;
            let site = solve_lattice_site(k, dk, n).unwrap();
            let x = site.x_at_m;
            let residual = k * (k * x).tan() + dk * (dk * x).tan();
            assert!(
                residual.abs() < 1e-6 * k,
                "q={q} n={n}: residual {residual:.3e}"
            );
        }
    }

    #[test]
    fn lattice_site_small_delta_k_limit() {
        let k = TWO_PI / 852e-9;
        let dk = 1e-3 * k;
        let site = solve_lattice_site(k, dk, 1).unwrap();
        assert!(lattice_up(k, dk, site.x_at_m).abs() < 1e-9 * k);
    }

    #[test]
    fn lattice_site_preset_frozen_values() {
        let site = preset_site();
        assert_relative_eq!(site.x_at_m, 4.394189e-6, max_relative = 1e-5);
        assert_relative_eq!(site.theta, 0.927928, max_relative = 1e-4);
        assert_relative_eq!(site.xi, 1.256534, max_relative = 1e-4);
        assert_relative_eq!(site.curvature, 2.007291e13, max_relative = 1e-4);
    }

    #[test]
    fn lattice_rejects_bad_arguments() {
        assert!(solve_lattice_site(1e7, 2e7, 1).is_err());
        assert!(solve_lattice_site(1e7, 1e5, 0).is_err());
    }

    #[test]
    fn membrane_geometry_special_points() {
        // quarter-period placement: sin = 1, cos = 0 → f = 2r exactly
        let k = 1.0;
        let (f1, f2) = membrane_geometry(0.45, k, k, PI / 4.0).unwrap();
        assert_relative_eq!(f1, 0.9, max_relative = 1e-14);
        assert_relative_eq!(f2, 0.9, max_relative = 1e-14);
        let (f1, _) = membrane_geometry(0.45, k, k, 0.0).unwrap();
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn membrane_position_degenerate_modes() {
        let k = TWO_PI / 852e-9;
        let placement = choose_membrane_position(0.45, k, k, PI / k * 2.0).unwrap();
        assert_relative_eq!(placement.f1, 0.9, max_relative = 1e-9);
        assert_relative_eq!(placement.f2, 0.9, max_relative = 1e-9);
    }

    #[test]
    fn membrane_position_preset_wavelengths() {
        let k1 = TWO_PI / 852e-9;
        let k2 = TWO_PI / 894e-9;
        let placement = choose_membrane_position(0.45, k1, k2, PI / (k1 - k2)).unwrap();
        assert!(placement.f1.min(placement.f2) >= 0.85);
    }

    #[test]
    fn membrane_position_vanishing_reflectivity() {
        let k = TWO_PI / 852e-9;
        let placement = choose_membrane_position(1e-9, k, k * 0.95, PI / (0.05 * k)).unwrap();
        assert!(placement.f1.abs() < 1e-8 && placement.f2.abs() < 1e-8);
    }

    #[test]
    fn derived_rates_consistency_and_example_values() {
        let rates = preset_rates();
        // Γ_m = γ_m·n̄ must equal k_BT/(ħQ)
        let p = &rates.params;
        let direct = KB * p.membrane.temperature_k / (HBAR * p.membrane.quality);
        assert_relative_eq!(rates.gamma_m_rad_s, direct, max_relative = 1e-6);
        assert_relative_eq!(rates.p_c_w, 850e-6, max_relative = 1e-12);
        assert!(rates.delta_t_k > 1.0 && rates.delta_t_k < 3.0);
        // frozen anchors for the preset geometry
        assert_relative_eq!(rates.omega_at_rad_s, 9.2449e6, max_relative = 2e-3);
        assert_relative_eq!(rates.eta, 0.0374747, max_relative = 2e-3);
        assert_relative_eq!(rates.g_atc_rad_s, 1.2564e7, max_relative = 2e-3);
        assert_relative_eq!(rates.g_mc_rad_s, 3.9412e6, max_relative = 2e-3);
        assert_relative_eq!(rates.g_rad_s, 2.3302e5, max_relative = 5e-3);
        assert_relative_eq!(rates.gamma_at_rad_s, 3.0083e4, max_relative = 5e-3);
        assert_relative_eq!(rates.gamma_c_plus_rad_s, 2.2229e4, max_relative = 5e-3);
        assert_relative_eq!(rates.gamma_c_minus_rad_s, 2.3100e4, max_relative = 5e-3);
    }

    #[test]
    fn zero_temperature_kills_thermal_rate() {
        let mut p = paper_preset();
        p.membrane.temperature_k = 0.0;
        let site = preset_site();
        let rates = derive_rates(&p, &site, 1e-7).unwrap();
        assert_eq!(rates.gamma_m_rad_s, 0.0);
        assert_eq!(rates.n_bar, 0.0);
    }

    #[test]
    fn exact_bose_factor_close_to_high_t_form() {
        let p = paper_preset();
        let t = 2.67;
        let high_t = thermal_occupation(t, p.membrane.omega_m_rad_s, false);
        let exact = thermal_occupation(t, p.membrane.omega_m_rad_s, true);
        assert_relative_eq!(high_t, exact, max_relative = 1e-4);
    }

    #[test]
    fn coupling_g_limits() {
        assert_eq!(effective_coupling_g(0.0, 1e6, 1e9, 1e7, 1e7), 0.0);
        // far-detuned asymptote G → 4·g_a·g_m/Δ
        let (ga, gm, om, kap): (f64, f64, f64, f64) = (1e6, 2e6, 1e7, 1e7);
        let delta = 31.0 * om.max(kap);
        let g = effective_coupling_g(ga, gm, delta, om, kap);
        assert_relative_eq!(g, 4.0 * ga * gm / delta, max_relative = 0.01);
    }

    #[test]
    fn cavity_decoherence_symmetry_and_ordering() {
        let (gp, gm_r, phi) = cavity_decoherence(1e6, 1e6, 0.0, 0.0, 1e7);
        assert_relative_eq!(phi, PI / 4.0, max_relative = 1e-14);
        let expect = 2.0 * (1e6f64.powi(2) + 1e6f64.powi(2)) / 1e7;
        assert_relative_eq!(gp, expect, max_relative = 1e-14);
        assert_relative_eq!(gm_r, expect, max_relative = 1e-14);
        let (gp, gm_r, _) = cavity_decoherence(1e6, 2e6, 8e8, 8e6, 4.7e7);
        assert!(gp < gm_r);
    }

    #[test]
    fn condition_ledger_preset() {
        let rates = preset_rates();
        let report = check_conditions(&rates, &ConditionThresholds::default());
        assert_relative_eq!(report.delta_over_kappa.ratio, 18.0, max_relative = 1e-12);
        let thermal_lhs = thermal_condition_lhs(&rates);
        assert!(
            thermal_lhs > 30.0 && thermal_lhs < 60.0,
            "thermal-link lhs = {thermal_lhs}"
        );
        let mass_ratio = rates.params.atom.mass_kg / rates.params.membrane.mass_kg;
        assert!((mass_ratio - 6e-13).abs() / 6e-13 < 0.10);
        assert_relative_eq!(report.balance.ratio, 0.2736, max_relative = 1e-3);
        assert_relative_eq!(report.coop_margin.ratio, 31.111, max_relative = 1e-3);
        assert!(report.all_pass(), "ledger: {report:?}");
        for r in report.g_ratios() {
            assert!(r >= 5.0, "G ratio {r} below 5");
        }
    }

    #[test]
    fn thermal_link_scaling_preset_numbers() {
        let s = thermal_link_scaling(50e-9, 200e-9, 100e-6, 5e-3, 2.5e-3, 10e-6).unwrap();
        assert_relative_eq!(s, 0.25 * 2f64.ln() / 5f64.ln(), max_relative = 1e-12);
        assert!(s > 0.09 && s < 0.12);
        // identity and linearity
        let id = thermal_link_scaling(1e-7, 1e-7, 100e-6, 5e-3, 1e-3, 10e-6).unwrap();
        let expected = 5f64.ln() / 5f64.ln();
        assert_relative_eq!(id, expected, max_relative = 1e-12);
        let doubled = thermal_link_scaling(2e-7, 1e-7, 100e-6, 5e-3, 1e-3, 10e-6).unwrap();
        assert_relative_eq!(doubled, 2.0 * id, max_relative = 1e-12);
        assert!(thermal_link_scaling(1e-7, 1e-7, 100e-6, 1e-3, 5e-3, 10e-6).is_err());
        assert!(thermal_link_scaling(1e-7, 1e-7, 10e-6, 5e-3, 1e-3, 10e-6).is_err());
    }

    #[test]
    fn config_round_trip_and_conversion() {
        let p = paper_preset();
        let cfg = params_to_config(&p);
        let back = params_from_config(&cfg).unwrap();
        assert_relative_eq!(
            back.atom.gamma_rad_s,
            p.atom.gamma_rad_s,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            back.membrane.omega_m_rad_s,
            p.membrane.omega_m_rad_s,
            max_relative = 1e-14
        );
        // the conversion is a single exact multiplication
        let json = serde_json::to_string(&cfg).unwrap();
        let parsed = parse_config_json(&json).unwrap();
        assert_eq!(parsed.atom.gamma_rad_s, cfg.atom.gamma_hz * TWO_PI);
        assert_eq!(parsed.cavity.detuning_rad_s, cfg.cavity.detuning_hz * TWO_PI);
        // kappa_th is not an oscillation frequency: no 2π factor
        assert_eq!(parsed.membrane.kappa_th_hz, cfg.membrane.kappa_th_hz);
    }

    #[test]
    fn config_rejects_unknown_fields_and_double_drive() {
        let p = paper_preset();
        let mut v = serde_json::to_value(params_to_config(&p)).unwrap();
        v["atom"]["typo_field"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<Config>(v.clone()).is_err());
        let mut v = serde_json::to_value(params_to_config(&p)).unwrap();
        v["drive"]["alpha"] = serde_json::json!(20.0);
        let cfg: Config = serde_json::from_value(v).unwrap();
        assert!(params_from_config(&cfg).is_err());
    }

    #[test]
    fn preset_validates_and_has_red_detuning() {
        let p = paper_preset();
        p.validate().unwrap();
        assert!(p.atom.delta_rad_s < 0.0);
        // λ₂ lands near the Cs D1 line
        assert!(p.atom.lambda2_m > 880e-9 && p.atom.lambda2_m < 910e-9);
    }

    #[test]
    fn resonant_alpha_matches_trap_frequency() {
        let p = paper_preset();
        let site = preset_site();
        let alpha = alpha_for_resonance(&p, &site).unwrap();
        let mut p2 = p.clone();
        p2.drive = Drive::Alpha(alpha);
        let rates = derive_rates(&p2, &site, 1e-7).unwrap();
        assert_relative_eq!(
            rates.omega_at_rad_s,
            p.membrane.omega_m_rad_s,
            max_relative = 1e-12
        );
    }
}
