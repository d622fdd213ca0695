//! Typed scenario: model, initial history and run settings, read from a
//! [`Config`] and written back to one without loss.
//!
//! Key families: `scenario.*`, `model.*`, `uptake.*`, `d.*` (dilution),
//! `s0.*` (feed), `history.*`, `run.*`, `output.*`, `orbit.*`, `window.*`,
//! `probe.*`, `verify.*`, `sweep.*`. See `docs/scenario-format.md`.

use chemostat_dde_core::{
    make_model, ChemostatModel, EnvironmentSignal, HistorySegment, Interpolation, UptakeFunction,
};

use crate::config::{Config, Reader, Value};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum UptakeSpec {
    Monod { max_rate: f64, half_saturation: f64 },
    Linear { rate: f64 },
    Tabulated { s: Vec<f64>, p: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Constant(f64),
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        period: f64,
    },
    Fourier {
        mean: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
        period: f64,
    },
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
        cubic: bool,
        period: Option<f64>,
    },
}

/// Initial segment on `[−τ, 0]`: constants, or uniform samples starting at `−τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySpec {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Steps per delay: `h = τ/n`, or `ω/(16n)` without delay.
    pub n: usize,
    /// Upper bound on the step; `n` is raised until the step fits.
    pub max_step: f64,
    /// Simulation horizon; defaults to 50 periods.
    pub horizon: Option<f64>,
    pub phi_tol: f64,
    pub phi_max_periods: usize,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSpec {
    pub tol: f64,
    pub max_periods: usize,
    pub accelerate: bool,
    /// Sup-norm sizes of the perturbations fed to the attraction measurement.
    pub perturbations: Vec<f64>,
    /// Periods followed per perturbation; 0 skips the measurement.
    pub attraction_periods: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    /// Defaults to `λ/2` for periodic models.
    pub eta: Option<f64>,
    /// Defaults to two periods.
    pub length: Option<f64>,
    /// Defaults to 60 periods.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub members: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Defaults to 100 periods.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: usize,
    /// Run the persistence probe on persistent points.
    pub probe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub tau: f64,
    pub period: Option<f64>,
    pub uptake: UptakeSpec,
    pub dilution: SignalSpec,
    pub feed: SignalSpec,
    pub history: HistorySpec,
    pub run: RunSpec,
    pub output_dir: String,
    pub orbit: OrbitSpec,
    pub window: WindowSpec,
    pub probe: ProbeSpec,
    /// Periods covered by the contraction check in `verify-lemmas`.
    pub verify_periods: usize,
    pub sweep: SweepSpec,
}

fn read_uptake(r: &Reader) -> Result<UptakeSpec> {
    let kind = r.text("uptake.kind")?.unwrap_or_else(|| "monod".into());
    match kind.as_str() {
        "monod" => Ok(UptakeSpec::Monod {
            max_rate: r.require_number("uptake.max_rate")?,
            half_saturation: r.require_number("uptake.half_saturation")?,
        }),
        "linear" => Ok(UptakeSpec::Linear {
            rate: r.require_number("uptake.rate")?,
        }),
        "tabulated" => Ok(UptakeSpec::Tabulated {
            s: r.require_list("uptake.s")?,
            p: r.require_list("uptake.p")?,
        }),
        other => Err(CliError::invalid(
            "uptake.kind",
            format!("unknown kind `{other}` (monod, linear, tabulated)"),
        )),
    }
}

fn read_signal(r: &Reader, prefix: &str, model_period: Option<f64>) -> Result<SignalSpec> {
    let key = |k: &str| format!("{prefix}.{k}");
    let period = |r: &Reader| -> Result<f64> {
        r.number(&key("period"))?
            .or(model_period)
            .ok_or_else(|| CliError::MissingKey(key("period")))
    };
    let kind = r.require_text(&key("kind"))?;
    match kind.as_str() {
        "constant" => Ok(SignalSpec::Constant(r.require_number(&key("value"))?)),
        "piecewise" => Ok(SignalSpec::Piecewise {
            breakpoints: r.require_list(&key("breakpoints"))?,
            values: r.require_list(&key("values"))?,
            period: period(r)?,
        }),
        "fourier" => Ok(SignalSpec::Fourier {
            mean: r.require_number(&key("mean"))?,
            cos: r.list(&key("cos"))?.unwrap_or_default(),
            sin: r.list(&key("sin"))?.unwrap_or_default(),
            period: period(r)?,
        }),
        "sampled" => {
            let interp = r.text(&key("interpolation"))?.unwrap_or_else(|| "linear".into());
            let cubic = match interp.as_str() {
                "linear" => false,
                "monotone_cubic" => true,
                other => {
                    return Err(CliError::invalid(
                        &key("interpolation"),
                        format!("unknown interpolation `{other}` (linear, monotone_cubic)"),
                    ))
                }
            };
            Ok(SignalSpec::Sampled {
                times: r.require_list(&key("times"))?,
                values: r.require_list(&key("values"))?,
                cubic,
                period: r.number(&key("period"))?,
            })
        }
        other => Err(CliError::invalid(
            &key("kind"),
            format!("unknown kind `{other}` (constant, piecewise, fourier, sampled)"),
        )),
    }
}

fn positive_count(key: &str, n: usize) -> Result<usize> {
    if n == 0 {
        Err(CliError::invalid(key, "must be at least 1"))
    } else {
        Ok(n)
    }
}

impl Scenario {
    /// Reads every key; unread keys are rejected as unknown.
    pub fn from_config(config: &Config) -> Result<Self> {
        let r = Reader::new(config);
        let period = r.number("model.period")?;
        let tau = r.require_number("model.tau")?;
        let history = HistorySpec {
            s: r.list("history.s")?.unwrap_or_else(|| vec![0.5]),
            x: r.list("history.x")?.unwrap_or_else(|| vec![0.2]),
        };
        let run = RunSpec {
            n: positive_count("run.n", r.count_or("run.n", 16)?)?,
            max_step: match r.number_or("run.max_step", 1.0 / 32.0)? {
                m if m > 0.0 => m,
                _ => return Err(CliError::invalid("run.max_step", "must be positive")),
            },
            horizon: r.number("run.horizon")?,
            phi_tol: r.number_or("run.phi_tol", 1e-9)?,
            phi_max_periods: r.count_or("run.phi_max_periods", 5000)?,
            workers: match r.count_or("run.workers", 0)? {
                0 if r.has("run.workers") => return Err(CliError::invalid("run.workers", "must be at least 1")),
                0 => None,
                w => Some(w),
            },
        };
        let scenario = Scenario {
            name: r.text("scenario.name")?,
            tau,
            period,
            uptake: read_uptake(&r)?,
            dilution: read_signal(&r, "d", period)?,
            feed: read_signal(&r, "s0", period)?,
            history,
            run,
            output_dir: r.text("output.dir")?.unwrap_or_else(|| ".".into()),
            orbit: OrbitSpec {
                tol: r.number_or("orbit.tol", 1e-8)?,
                max_periods: r.count_or("orbit.max_periods", 2000)?,
                accelerate: r.flag_or("orbit.accelerate", false)?,
                perturbations: r.list("orbit.perturbations")?.unwrap_or_else(|| vec![1e-3, 1e-5]),
                attraction_periods: r.count_or("orbit.attraction_periods", 400)?,
            },
            window: WindowSpec {
                eta: r.number("window.eta")?,
                length: r.number("window.length")?,
                horizon: r.number("window.horizon")?,
            },
            probe: ProbeSpec {
                members: positive_count("probe.members", r.count_or("probe.members", 16)?)?,
                x_min: r.number_or("probe.x_min", 1e-6)?,
                x_max: r.number_or("probe.x_max", 1.0)?,
                s_min: r.number_or("probe.s_min", 0.1)?,
                s_max: r.number_or("probe.s_max", 1.4)?,
                horizon: r.number("probe.horizon")?,
            },
            verify_periods: positive_count("verify.periods", r.count_or("verify.periods", 20)?)?,
            sweep: SweepSpec {
                param: r.text("sweep.param")?,
                from: r.number("sweep.from")?,
                to: r.number("sweep.to")?,
                steps: r.count_or("sweep.steps", 11)?,
                probe: r.flag_or("sweep.probe", true)?,
            },
        };
        r.finish()?;
        Ok(scenario)
    }

    /// Every field as an explicit key; `from_config(to_config(s)) == s`.
    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        let num = |c: &mut Config, k: &str, x: f64| c.set(k, Value::Number(x));
        let opt = |c: &mut Config, k: &str, x: Option<f64>| {
            if let Some(x) = x {
                c.set(k, Value::Number(x));
            }
        };
        if let Some(name) = &self.name {
            c.set("scenario.name", Value::text(name));
        }
        num(&mut c, "model.tau", self.tau);
        opt(&mut c, "model.period", self.period);
        match &self.uptake {
            UptakeSpec::Monod {
                max_rate,
                half_saturation,
            } => {
                c.set("uptake.kind", Value::text("monod"));
                num(&mut c, "uptake.max_rate", *max_rate);
                num(&mut c, "uptake.half_saturation", *half_saturation);
            }
            UptakeSpec::Linear { rate } => {
                c.set("uptake.kind", Value::text("linear"));
                num(&mut c, "uptake.rate", *rate);
            }
            UptakeSpec::Tabulated { s, p } => {
                c.set("uptake.kind", Value::text("tabulated"));
                c.set("uptake.s", Value::list(s.clone()));
                c.set("uptake.p", Value::list(p.clone()));
            }
        }
        write_signal(&mut c, "d", &self.dilution);
        write_signal(&mut c, "s0", &self.feed);
        c.set("history.s", Value::list(self.history.s.clone()));
        c.set("history.x", Value::list(self.history.x.clone()));
        num(&mut c, "run.n", self.run.n as f64);
        num(&mut c, "run.max_step", self.run.max_step);
        opt(&mut c, "run.horizon", self.run.horizon);
        num(&mut c, "run.phi_tol", self.run.phi_tol);
        num(&mut c, "run.phi_max_periods", self.run.phi_max_periods as f64);
        opt(&mut c, "run.workers", self.run.workers.map(|w| w as f64));
        c.set("output.dir", Value::text(&self.output_dir));
        num(&mut c, "orbit.tol", self.orbit.tol);
        num(&mut c, "orbit.max_periods", self.orbit.max_periods as f64);
        c.set("orbit.accelerate", Value::flag(self.orbit.accelerate));
        if !self.orbit.perturbations.is_empty() {
            c.set("orbit.perturbations", Value::list(self.orbit.perturbations.clone()));
        }
        num(&mut c, "orbit.attraction_periods", self.orbit.attraction_periods as f64);
        opt(&mut c, "window.eta", self.window.eta);
        opt(&mut c, "window.length", self.window.length);
        opt(&mut c, "window.horizon", self.window.horizon);
        num(&mut c, "probe.members", self.probe.members as f64);
        num(&mut c, "probe.x_min", self.probe.x_min);
        num(&mut c, "probe.x_max", self.probe.x_max);
        num(&mut c, "probe.s_min", self.probe.s_min);
        num(&mut c, "probe.s_max", self.probe.s_max);
        opt(&mut c, "probe.horizon", self.probe.horizon);
        num(&mut c, "verify.periods", self.verify_periods as f64);
        if let Some(p) = &self.sweep.param {
            c.set("sweep.param", Value::text(p));
        }
        opt(&mut c, "sweep.from", self.sweep.from);
        opt(&mut c, "sweep.to", self.sweep.to);
        num(&mut c, "sweep.steps", self.sweep.steps as f64);
        c.set("sweep.probe", Value::flag(self.sweep.probe));
        c
    }

    /// Validates the model assumptions and builds it.
    pub fn model(&self) -> Result<ChemostatModel> {
        let uptake = match &self.uptake {
            UptakeSpec::Monod {
                max_rate,
                half_saturation,
            } => UptakeFunction::monod(*max_rate, *half_saturation)?,
            UptakeSpec::Linear { rate } => UptakeFunction::linear(*rate)?,
            UptakeSpec::Tabulated { s, p } => UptakeFunction::tabulated(s.clone(), p.clone())?,
        };
        Ok(make_model(
            self.tau,
            uptake,
            build_signal(&self.dilution)?,
            build_signal(&self.feed)?,
            self.period,
        )?)
    }

    /// Reference period of the model (its period, or 1 for aperiodic inputs).
    pub fn reference_period(model: &ChemostatModel) -> f64 {
        model.period().unwrap_or(1.0)
    }

    /// Integration step `τ/n`, or `ω/(16n)` without delay, refined until it
    /// is at most `run.max_step`.
    pub fn step(&self, model: &ChemostatModel) -> f64 {
        let (span, n) = if self.tau > 0.0 {
            (self.tau, self.run.n)
        } else {
            (Self::reference_period(model), 16 * self.run.n)
        };
        let needed = (span / self.run.max_step - 1e-9).ceil() as usize;
        span / n.max(needed) as f64
    }

    pub fn horizon(&self, model: &ChemostatModel) -> f64 {
        self.run.horizon.unwrap_or(50.0 * Self::reference_period(model))
    }

    pub fn initial_segment(&self) -> Result<HistorySegment> {
        let HistorySpec { s, x } = &self.history;
        let seg = match (s.len(), x.len()) {
            (1, 1) => HistorySegment::constant(self.tau, 0.0, s[0], x[0])?,
            _ if self.tau == 0.0 => {
                return Err(CliError::invalid(
                    "history.s",
                    "sampled histories need a positive delay; give single numbers",
                ))
            }
            (a, b) if a == b => HistorySegment::from_samples(self.tau, 0.0, s.clone(), x.clone())?,
            (1, n) => HistorySegment::from_samples(self.tau, 0.0, vec![s[0]; n], x.clone())?,
            (n, 1) => HistorySegment::from_samples(self.tau, 0.0, s.clone(), vec![x[0]; n])?,
            _ => {
                return Err(CliError::invalid(
                    "history.x",
                    "history.s and history.x must have the same number of samples",
                ))
            }
        };
        Ok(seg)
    }
}

fn write_signal(c: &mut Config, prefix: &str, spec: &SignalSpec) {
    let key = |k: &str| format!("{prefix}.{k}");
    match spec {
        SignalSpec::Constant(v) => {
            c.set(&key("kind"), Value::text("constant"));
            c.set(&key("value"), Value::Number(*v));
        }
        SignalSpec::Piecewise {
            breakpoints,
            values,
            period,
        } => {
            c.set(&key("kind"), Value::text("piecewise"));
            c.set(&key("breakpoints"), Value::list(breakpoints.clone()));
            c.set(&key("values"), Value::list(values.clone()));
            c.set(&key("period"), Value::Number(*period));
        }
        SignalSpec::Fourier {
            mean,
            cos,
            sin,
            period,
        } => {
            c.set(&key("kind"), Value::text("fourier"));
            c.set(&key("mean"), Value::Number(*mean));
            if !cos.is_empty() {
                c.set(&key("cos"), Value::list(cos.clone()));
            }
            if !sin.is_empty() {
                c.set(&key("sin"), Value::list(sin.clone()));
            }
            c.set(&key("period"), Value::Number(*period));
        }
        SignalSpec::Sampled {
            times,
            values,
            cubic,
            period,
        } => {
            c.set(&key("kind"), Value::text("sampled"));
            c.set(&key("times"), Value::list(times.clone()));
            c.set(&key("values"), Value::list(values.clone()));
            let interp = if *cubic { "monotone_cubic" } else { "linear" };
            c.set(&key("interpolation"), Value::text(interp));
            if let Some(p) = period {
                c.set(&key("period"), Value::Number(*p));
            }
        }
    }
}

fn build_signal(spec: &SignalSpec) -> Result<EnvironmentSignal> {
    Ok(match spec {
        SignalSpec::Constant(v) => EnvironmentSignal::constant(*v)?,
        SignalSpec::Piecewise {
            breakpoints,
            values,
            period,
        } => EnvironmentSignal::piecewise_constant(breakpoints.clone(), values.clone(), *period)?,
        SignalSpec::Fourier {
            mean,
            cos,
            sin,
            period,
        } => EnvironmentSignal::fourier(*mean, cos.clone(), sin.clone(), *period)?,
        SignalSpec::Sampled {
            times,
            values,
            cubic,
            period,
        } => {
            let interp = if *cubic {
                Interpolation::MonotoneCubic
            } else {
                Interpolation::Linear
            };
            EnvironmentSignal::sampled(times.clone(), values.clone(), interp, *period)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "model.tau = 0.5\nuptake.max_rate = 2\nuptake.half_saturation = 1\n\
                        d.kind = \"constant\"\nd.value = 0.5\ns0.kind = \"constant\"\ns0.value = 1\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let sc = Scenario::from_config(&Config::parse(BASE, "t").unwrap()).unwrap();
        assert_eq!(sc.run.n, 16);
        assert_eq!(sc.history, HistorySpec { s: vec![0.5], x: vec![0.2] });
        let model = sc.model().unwrap();
        assert_eq!(sc.step(&model), 0.5 / 16.0);
        let long = Scenario { tau: 2.0, ..sc.clone() };
        assert_eq!(long.step(&model), 2.0 / 64.0);
        let coarse = Scenario { run: RunSpec { max_step: 1.0, ..sc.run.clone() }, ..long };
        assert_eq!(coarse.step(&model), 2.0 / 16.0);
        assert_eq!(model.period(), Some(1.0));
    }

    #[test]
    fn keys_of_another_kind_are_unknown() {
        let text = format!("{BASE}d.mean = 3\n");
        match Scenario::from_config(&Config::parse(&text, "f").unwrap()) {
            Err(CliError::UnknownKey { key, line, .. }) => assert_eq!((key.as_str(), line), ("d.mean", 8)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_signal_period_is_reported() {
        let text = BASE.replace("d.kind = \"constant\"\nd.value = 0.5", "d.kind = \"fourier\"\nd.mean = 0.5");
        match Scenario::from_config(&Config::parse(&text, "f").unwrap()) {
            Err(CliError::MissingKey(k)) => assert_eq!(k, "d.period"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn typed_round_trip_is_exact() {
        let text = format!(
            "{BASE}model.period = 2\nhistory.x = 0.1, 0.2, 0.3\nwindow.eta = 0.05\nsweep.param = \"d.value\"\n"
        );
        let sc = Scenario::from_config(&Config::parse(&text, "f").unwrap()).unwrap();
        let again = Scenario::from_config(&Config::parse(&sc.to_config().to_text(), "g").unwrap()).unwrap();
        assert_eq!(again, sc);
    }

    #[test]
    fn zero_workers_is_rejected() {
        let text = format!("{BASE}run.workers = 0\n");
        assert!(matches!(
            Scenario::from_config(&Config::parse(&text, "f").unwrap()),
            Err(CliError::InvalidValue { .. })
        ));
    }
}
