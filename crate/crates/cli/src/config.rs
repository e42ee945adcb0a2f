use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use vou::diagnostics::WeightFunction;
use vou::drift::{Component, DriftMeasure};
use vou::grid::{make_grid, Axis, Field, SpaceTimeGrid};
use vou::kernels::{effective_kernel, EffectiveKernel, Kernel};
use vou::levy::{JumpLaw, LevyBasisSpec, LevyMeasureModel, SmallJumpMode};
use vou::resolvent::{closed_form_resolvent, neumann_resolvent, NeumannOptions, ResolventRepr};
use vou::simulator::{Method, Mode, SimulationPlan};

use crate::CliError;

const SECTIONS: [&str; 7] = ["seed", "grid", "levy", "mu", "g", "plan", "diagnostics"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub t_max: f64,
    pub dt: f64,
    /// spatial axes are `[-x_max, x_max]`
    #[serde(default)]
    pub x_max: f64,
    #[serde(default = "one_f")]
    pub dx: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuSection {
    pub kind: String,
    pub rate: Option<f64>,
    pub law: Option<String>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub z1: Option<f64>,
    pub p: Option<f64>,
    pub z2: Option<f64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    pub b: f64,
    pub sigma: f64,
    pub nu: Option<NuSection>,
    pub epsilon: Option<f64>,
    pub small_jump_mode: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSection {
    pub kind: String,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GSection {
    pub kind: String,
    pub lambda_p: Option<f64>,
    pub c: Option<f64>,
    /// `exp` or `gaussian` for `spatial_only`
    pub profile: Option<String>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub mode: Option<String>,
    pub pad: Option<f64>,
    pub burn_in: Option<f64>,
    pub method: Option<String>,
    pub replicates: Option<usize>,
    pub tail_tol: Option<f64>,
    pub resolvent_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub weight: Option<String>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub regvar_alpha: Option<f64>,
    pub regvar_dt: Option<f64>,
    pub cadlag: Option<String>,
    pub radius: Option<usize>,
    pub max_jumps: Option<usize>,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

/// A parsed run configuration with its provenance hash.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridSection,
    pub levy: Option<LevySection>,
    pub mu: Option<MuSection>,
    pub g: Option<GSection>,
    pub plan: PlanSection,
    pub diagnostics: DiagnosticsSection,
    pub hash: String,
    base: PathBuf,
}

fn section<T: DeserializeOwned>(table: &toml::Table, name: &str) -> Result<Option<T>, CliError> {
    let Some(v) = table.get(name) else { return Ok(None) };
    T::deserialize(v.clone()).map(Some).map_err(|e| {
        let msg = e.message().to_string();
        let key = field_in(&msg, "missing field `")
            .or_else(|| field_in(&msg, "unknown field `"))
            .map_or_else(|| name.to_string(), |f| format!("{name}.{f}"));
        CliError::Config { key, msg }
    })
}

fn field_in(msg: &str, lead: &str) -> Option<String> {
    let rest = &msg[msg.find(lead)? + lead.len()..];
    Some(rest[..rest.find('`')?].to_string())
}

fn need<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config { key: key.to_string(), msg: "missing field".into() })
}

fn bad(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), msg: msg.into() }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| bad("config", e.message().to_string()))?;
        for k in table.keys() {
            if !SECTIONS.contains(&k.as_str()) {
                return Err(bad(k, "unknown key"));
            }
        }
        let seed = match table.get("seed") {
            None => 0,
            Some(toml::Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(_) => return Err(bad("seed", "must be a non-negative integer")),
        };
        Ok(Self {
            seed,
            grid: need(section(&table, "grid")?, "grid")?,
            levy: section(&table, "levy")?,
            mu: section(&table, "mu")?,
            g: section(&table, "g")?,
            plan: section(&table, "plan")?.unwrap_or_default(),
            diagnostics: section(&table, "diagnostics")?.unwrap_or_default(),
            hash: hash_bytes(text.as_bytes()),
            base,
        })
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid, CliError> {
        let g = &self.grid;
        if !(g.dt > 0.0 && g.t_max > 0.0) {
            return Err(bad("grid.dt", "t_max and dt must be positive"));
        }
        let nt = (g.t_max / g.dt).round() as usize + 1;
        let space = if g.x_max > 0.0 {
            vec![Axis::symmetric((g.x_max / g.dx).round() as usize, g.dx); g.dim]
        } else {
            vec![Axis::new(0.0, g.dx, 1); g.dim]
        };
        make_grid(g.dim, Axis::new(0.0, g.dt, nt), &space).map_err(|e| bad("grid", e.to_string()))
    }

    pub fn levy(&self) -> Result<LevyBasisSpec, CliError> {
        let l = need(self.levy.as_ref(), "levy")?;
        let nu = match &l.nu {
            None => LevyMeasureModel::Zero,
            Some(n) => match n.kind.as_str() {
                "zero" => LevyMeasureModel::Zero,
                "compound_poisson" => {
                    let law = match n.law.as_deref().unwrap_or("normal") {
                        "normal" => JumpLaw::Normal { mean: n.mean.unwrap_or(0.0), sd: need(n.sd, "levy.nu.sd")? },
                        "uniform" => JumpLaw::Uniform { a: need(n.lo, "levy.nu.lo")?, b: need(n.hi, "levy.nu.hi")? },
                        "two_point" => JumpLaw::TwoPoint { z1: need(n.z1, "levy.nu.z1")?, p: need(n.p, "levy.nu.p")?, z2: need(n.z2, "levy.nu.z2")? },
                        other => return Err(bad("levy.nu.law", format!("unknown law `{other}`"))),
                    };
                    LevyMeasureModel::CompoundPoisson { rate: need(n.rate, "levy.nu.rate")?, law }
                }
                "tempered_stable" => LevyMeasureModel::TemperedStable {
                    alpha: need(n.alpha, "levy.nu.alpha")?,
                    theta: need(n.theta, "levy.nu.theta")?,
                    scale: n.scale.unwrap_or(1.0),
                },
                other => return Err(bad("levy.nu.kind", format!("unknown kind `{other}`"))),
            },
        };
        let mut spec = LevyBasisSpec::new(l.b, l.sigma, nu).map_err(|e| bad("levy", e.to_string()))?;
        if l.epsilon.is_some() || l.small_jump_mode.is_some() {
            let mode = match l.small_jump_mode.as_deref().unwrap_or("discard") {
                "discard" => SmallJumpMode::Discard,
                "gaussian" => SmallJumpMode::GaussianCompensate,
                other => return Err(bad("levy.small_jump_mode", format!("unknown mode `{other}`"))),
            };
            spec = spec.with_small_jumps(l.epsilon.unwrap_or(spec.small_jump_cutoff), mode).map_err(|e| bad("levy.epsilon", e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn mu(&self) -> Result<DriftMeasure, CliError> {
        let Some(m) = &self.mu else { return Ok(DriftMeasure::zero(self.grid.dim)) };
        let d = self.grid.dim;
        let lambda = || need(m.lambda, "mu.lambda");
        let r = match m.kind.as_str() {
            "zero" => return Ok(DriftMeasure::zero(d)),
            "ou" => DriftMeasure::ou(lambda()?, d),
            "regvar" => DriftMeasure::regvar(need(m.alpha, "mu.alpha")?, d),
            "cauchy_spatial" => Ok(DriftMeasure::cauchy_spatial(lambda()?)),
            "exp_spatial" => Ok(DriftMeasure::exp_spatial(lambda()?)),
            "heat" => DriftMeasure::heat(lambda()?, d),
            "custom_density_file" => {
                let field = self.read_field(need(m.file.as_ref(), "mu.file")?)?;
                DriftMeasure::new(d, vec![Component::Tabulated { field }])
            }
            other => return Err(bad("mu.kind", format!("unknown kind `{other}`"))),
        };
        r.map_err(|e| bad("mu", e.to_string()))
    }

    pub fn g(&self) -> Result<Kernel, CliError> {
        let g = need(self.g.as_ref(), "g")?;
        let lp = || need(g.lambda_p, "g.lambda_p");
        let r = match g.kind.as_str() {
            "exp_spatial" => Kernel::exp_spatial(lp()?),
            "cone" => Kernel::cone(need(g.c, "g.c")?, lp()?),
            "spatial_only" => {
                let a = lp()?;
                let (tag, f): (String, vou::drift::FnX) = match g.profile.as_deref().unwrap_or("exp") {
                    "exp" => (format!("exp({a})"), std::sync::Arc::new(move |x: &[f64]| (-a * x.iter().map(|v| v * v).sum::<f64>().sqrt()).exp())),
                    "gaussian" => (format!("gauss({a})"), std::sync::Arc::new(move |x: &[f64]| (-a * x.iter().map(|v| v * v).sum::<f64>()).exp())),
                    other => return Err(bad("g.profile", format!("unknown profile `{other}`"))),
                };
                Ok(Kernel::SpatialOnly { g0: f, tag })
            }
            "file" => Ok(Kernel::Tabulated(self.read_field(need(g.file.as_ref(), "g.file")?)?)),
            other => return Err(bad("g.kind", format!("unknown kind `{other}`"))),
        };
        r.map_err(|e| bad("g", e.to_string()))
    }

    fn read_field(&self, p: &Path) -> Result<Field, CliError> {
        let path = if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) };
        let f = fs::File::open(&path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        Field::read_vgf1(std::io::BufReader::new(f)).map_err(|e| bad("file", format!("{}: {e}", path.display())))
    }

    pub fn neumann_options(&self) -> NeumannOptions {
        let mut o = NeumannOptions::default();
        if let Some(t) = self.plan.resolvent_tol {
            o.tol = t;
        }
        o
    }

    /// Closed form when recognized, Neumann series on `grid` otherwise.
    pub fn resolvent(&self, grid: &SpaceTimeGrid) -> Result<ResolventRepr, CliError> {
        let mu = self.mu()?;
        match closed_form_resolvent(&mu) {
            Some(r) => Ok(r),
            None => Ok(neumann_resolvent(&mu, grid, &self.neumann_options())?),
        }
    }

    pub fn effective_kernel(&self) -> Result<EffectiveKernel, CliError> {
        let grid = self.grid()?;
        let rho = self.resolvent(&grid)?;
        Ok(effective_kernel(&self.g()?, &rho, &grid)?)
    }

    pub fn plan(&self) -> Result<SimulationPlan, CliError> {
        let p = &self.plan;
        let mode = match p.mode.as_deref().unwrap_or("causal") {
            "causal" => Mode::Causal { pad: p.pad },
            "stationary" => Mode::Stationary { burn_in: p.burn_in, pad: p.pad },
            other => return Err(bad("plan.mode", format!("unknown mode `{other}`"))),
        };
        let method = match p.method.as_deref().unwrap_or("fft") {
            "fft" => Method::Fft,
            "direct" => Method::Direct,
            other => return Err(bad("plan.method", format!("unknown method `{other}`"))),
        };
        let mut plan = SimulationPlan::new(self.grid()?, self.levy()?, self.effective_kernel()?, mode, self.seed, p.replicates.unwrap_or(1));
        plan.method = method;
        if let Some(t) = p.tail_tol {
            plan.tail_tol = t;
        }
        Ok(plan)
    }

    pub fn weight(&self) -> Result<Option<WeightFunction>, CliError> {
        let d = &self.diagnostics;
        Ok(match d.weight.as_deref() {
            None | Some("none") => None,
            Some("polylog") => Some(WeightFunction::PolyLog { eta: d.eta.unwrap_or(0.0), gamma: d.gamma.unwrap_or(0.0) }),
            Some("exponential") => Some(WeightFunction::Exponential { gamma: need(d.gamma, "diagnostics.gamma")? }),
            Some(other) => return Err(bad("diagnostics.weight", format!("unknown weight `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "seed = 3\n[grid]\nt_max = 1.0\ndt = 0.1\nx_max = 1.0\ndx = 0.1\n[levy]\nb = 0.0\nsigma = 1.0\n[mu]\nkind = \"ou\"\nlambda = 1.0\n[g]\nkind = \"exp_spatial\"\nlambda_p = 1.0\n";

    #[test]
    fn parses_reference_config() {
        let c = RunConfig::parse(BASE, PathBuf::new()).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid().unwrap().len(), 11 * 21);
        assert!(matches!(c.effective_kernel().unwrap(), EffectiveKernel::Ex1 { .. }));
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASE.replace("sigma = 1.0\n", "");
        match RunConfig::parse(&text, PathBuf::new()) {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "levy.sigma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("dt = 0.1\n", "dt = 0.1\nstep = 2\n");
        assert!(matches!(RunConfig::parse(&text, PathBuf::new()), Err(CliError::Config { ref key, .. }) if key == "grid.step"));
        let text = format!("{BASE}[extra]\na = 1\n");
        assert!(matches!(RunConfig::parse(&text, PathBuf::new()), Err(CliError::Config { ref key, .. }) if key == "extra"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse(BASE, PathBuf::new()).unwrap();
        let b = RunConfig::parse(&BASE.replace("seed = 3", "seed = 4"), PathBuf::new()).unwrap();
        assert_eq!(a.hash.len(), 16);
        assert_ne!(a.hash, b.hash);
    }
}
