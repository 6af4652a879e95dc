//! The fixed set of experiments and their defaults.

use std::fmt;
use std::str::FromStr;

use prinn_core::fuzzy::{MembershipFunction, Rule, SNorm, TNorm, TriangularFuzzyNumber};
use prinn_core::losses::{Preset, Uncertain};
use prinn_core::Normal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    PinnDecay,
    FcinnDecay,
    SinnetOscillator,
    FinnCase1,
    FinnDerivativeCase2,
    FinnController,
}

/// Per-experiment defaults that differ between experiments.
#[derive(Clone, Debug)]
pub struct Defaults {
    pub preset: Option<Preset>,
    pub domain: (f64, f64),
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub data: Vec<(f64, f64)>,
    /// Residual parameter (`lambda` or `zeta`).
    pub rate: Uncertain<f64>,
    pub rules: Vec<Rule<f64>>,
    pub tnorm: TNorm,
    pub snorm: SNorm,
}

fn tri(a: f64, b: f64, c: f64) -> MembershipFunction<f64> {
    MembershipFunction::triangular(a, b, c).expect("valid default membership")
}

fn gauss(c: f64, w: f64) -> MembershipFunction<f64> {
    MembershipFunction::gaussian(c, w).expect("valid default membership")
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::PinnDecay,
        Experiment::FcinnDecay,
        Experiment::SinnetOscillator,
        Experiment::FinnCase1,
        Experiment::FinnDerivativeCase2,
        Experiment::FinnController,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PinnDecay => "pinn-decay",
            Experiment::FcinnDecay => "fcinn-decay",
            Experiment::SinnetOscillator => "sinnet-oscillator",
            Experiment::FinnCase1 => "finn-case1",
            Experiment::FinnDerivativeCase2 => "finn-derivative-case2",
            Experiment::FinnController => "finn-controller",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::PinnDecay => "crisp exponential decay fitted from its residual alone",
            Experiment::FcinnDecay => "fuzzy decay rate, trained at pinned (mu, alpha) and checked against alpha-cut envelopes",
            Experiment::SinnetOscillator => "damped oscillator with a Z-number damping ratio and a sureness loss",
            Experiment::FinnCase1 => "rules on the state: small t gives large x, large t gives medium x",
            Experiment::FinnDerivativeCase2 => "rules on the slope: near zero it is small, about 10 it is about 2",
            Experiment::FinnController => "online rule-trained controller on a first-order plant",
        }
    }

    /// The governing equation or restriction, written out.
    pub fn anchor(self) -> &'static str {
        match self {
            Experiment::PinnDecay => "dx/dt = -0.5 x, x(0) = 5",
            Experiment::FcinnDecay => "dx/dt = lambda x, lambda = (-0.6, -0.5, -0.4), x(0) = 5",
            Experiment::SinnetOscillator => "x'' + 2 zeta omega x' + omega^2 x = 0, zeta = Z((0.15, 0.2, 0.25), N(0.2, 0.01))",
            Experiment::FinnCase1 => "R(t, x) = small(t) ^ large(x) v large(t) ^ medium(x)",
            Experiment::FinnDerivativeCase2 => "R(t, dx/dt) = nearzero(t) ^ small(dx/dt) v about10(t) ^ about2(dx/dt)",
            Experiment::FinnController => "R(e, de/dt, u) over a 3x3 PD table, u = net(e, de/dt)",
        }
    }

    /// Presets the experiment accepts; the first is the default.
    pub fn presets(self) -> &'static [Preset] {
        match self {
            Experiment::PinnDecay => &[Preset::Singular],
            Experiment::FcinnDecay => &[Preset::Possibility],
            Experiment::SinnetOscillator => &[Preset::Sureness, Preset::SurenessPointwise],
            Experiment::FinnCase1 => &[Preset::Finn],
            Experiment::FinnDerivativeCase2 => &[Preset::FinnDerivative],
            Experiment::FinnController => &[],
        }
    }

    pub fn defaults(self) -> Defaults {
        let base = Defaults {
            preset: self.presets().first().copied(),
            domain: (0.0, 3.0),
            epochs: 1500,
            learning_rate: 1e-2,
            hidden: vec![32, 32],
            data: Vec::new(),
            rate: Uncertain::Crisp(-0.5),
            rules: Vec::new(),
            tnorm: TNorm::Min,
            snorm: SNorm::Max,
        };
        match self {
            Experiment::PinnDecay | Experiment::FinnController => base,
            Experiment::FcinnDecay => Defaults {
                hidden: vec![16, 16],
                rate: Uncertain::Fuzzy(TriangularFuzzyNumber::new(-0.6, -0.5, -0.4).expect("ordered")),
                ..base
            },
            Experiment::SinnetOscillator => Defaults {
                hidden: vec![16, 16],
                domain: (0.0, 3.0),
                rate: Uncertain::Z(
                    TriangularFuzzyNumber::new(0.15, 0.2, 0.25).expect("ordered"),
                    Normal::new(0.2, 0.01).expect("positive variance"),
                ),
                ..base
            },
            Experiment::FinnCase1 => Defaults {
                hidden: vec![16, 16],
                domain: (0.0, 10.0),
                epochs: 1000,
                learning_rate: 1e-3,
                data: vec![(0.0, 8.0), (10.0, 4.0)],
                rules: vec![
                    Rule::new(vec![tri(0.0, 0.0, 10.0)], gauss(8.0, 2.0)),
                    Rule::new(vec![tri(0.0, 10.0, 10.0)], gauss(4.0, 2.0)),
                ],
                ..base
            },
            Experiment::FinnDerivativeCase2 => Defaults {
                hidden: vec![16, 16],
                domain: (0.0, 10.0),
                epochs: 1000,
                learning_rate: 1e-3,
                data: vec![(0.0, 0.0)],
                // Under min/max the slope stalls at zero: once the first
                // antecedent is the active minimum, the slope gets no
                // gradient. Product and bounded sum keep both rules live.
                rules: vec![
                    Rule::new(vec![tri(0.0, 0.0, 10.0)], gauss(0.0, 1.0)),
                    Rule::new(vec![tri(0.0, 10.0, 10.0)], gauss(2.0, 1.0)),
                ],
                tnorm: TNorm::Product,
                snorm: SNorm::BoundedSum,
                ..base
            },
        }
    }

    /// Closest registered name, for "did you mean" hints.
    pub fn suggest(name: &str) -> Option<&'static str> {
        Experiment::ALL
            .iter()
            .map(|e| (strsim::levenshtein(name, e.name()), e.name()))
            .filter(|&(d, n)| d <= 4 || n.starts_with(name) || n.contains(name))
            .min_by_key(|&(d, _)| d)
            .map(|(_, n)| n)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        Experiment::ALL.iter().copied().find(|e| e.name() == s).ok_or_else(|| match Experiment::suggest(s) {
            Some(hint) => format!("unknown experiment `{s}`; did you mean `{hint}`?"),
            None => format!("unknown experiment `{s}`; run `prinn list` for the available ones"),
        })
    }
}
