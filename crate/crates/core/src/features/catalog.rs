use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::stats::{self, BinOuter};
use super::symbolic::{permutation_entropy, polvar};
use super::wavelet::{wavelet_feature, WaveletStat};
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::pts::SLOTS_PER_DAY;

/// A statistic and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Mean,
    Sd,
    Min,
    Max,
    First,
    Last,
    Range,
    Slope,
    Acf1,
    Binned { n_bins: usize, outer: BinOuter },
    Polvar { d: f64, word_len: usize },
    PermutationEntropy { m: usize, tau: usize },
    Wavelet { level: usize, stat: WaveletStat },
}

impl Statistic {
    pub fn compute(&self, x: &[f64]) -> Option<f64> {
        if x.is_empty() {
            return None;
        }
        let v = match *self {
            Statistic::Mean => Some(stats::mean(x)),
            Statistic::Sd => stats::sample_sd(x),
            Statistic::Min => Some(x.iter().copied().fold(f64::INFINITY, f64::min)),
            Statistic::Max => Some(x.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Statistic::First => x.first().copied(),
            Statistic::Last => x.last().copied(),
            Statistic::Range => stats::basic_stats(x).map(|s| s.range),
            Statistic::Slope => stats::slope(x),
            Statistic::Acf1 => stats::acf1(x),
            Statistic::Binned { n_bins, outer } => stats::binned_stat(x, n_bins, outer),
            Statistic::Polvar { d, word_len } => polvar(x, d, word_len),
            Statistic::PermutationEntropy { m, tau } => permutation_entropy(x, m, tau),
            Statistic::Wavelet { level, stat } => wavelet_feature(x, level, stat),
        };
        v.filter(|v| v.is_finite())
    }

    fn id(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Sd => "sd",
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::First => "first",
            Statistic::Last => "last",
            Statistic::Range => "range",
            Statistic::Slope => "slope",
            Statistic::Acf1 => "acf1",
            Statistic::Binned { .. } => "binned",
            Statistic::Polvar { .. } => "polvar",
            Statistic::PermutationEntropy { .. } => "permutation_entropy",
            Statistic::Wavelet { .. } => "wavelet",
        }
    }

    fn params(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        match *self {
            Statistic::Binned { n_bins, outer } => {
                p.insert("n_bins".into(), Value::from(n_bins));
                p.insert("outer".into(), serde_json::to_value(outer).unwrap());
            }
            Statistic::Polvar { d, word_len } => {
                p.insert("d".into(), Value::from(d));
                p.insert("word_len".into(), Value::from(word_len));
            }
            Statistic::PermutationEntropy { m, tau } => {
                p.insert("m".into(), Value::from(m));
                p.insert("tau".into(), Value::from(tau));
            }
            Statistic::Wavelet { level, stat } => {
                p.insert("level".into(), Value::from(level));
                p.insert("stat".into(), serde_json::to_value(stat).unwrap());
            }
            _ => {}
        }
        p
    }

    fn parse(field: &str, id: &str, params: &BTreeMap<String, Value>) -> Result<Statistic> {
        let bad = |msg: String| Error::config(field, msg);
        let uint = |key: &str| -> Result<usize> {
            params
                .get(key)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| bad(format!("`{id}` needs integer parameter `{key}`")))
        };
        let stat = match id {
            "mean" => Statistic::Mean,
            "sd" => Statistic::Sd,
            "min" => Statistic::Min,
            "max" => Statistic::Max,
            "first" => Statistic::First,
            "last" => Statistic::Last,
            "range" => Statistic::Range,
            "slope" => Statistic::Slope,
            "acf1" => Statistic::Acf1,
            "binned" => Statistic::Binned {
                n_bins: uint("n_bins")?,
                outer: params
                    .get("outer")
                    .cloned()
                    .map(serde_json::from_value)
                    .transpose()
                    .map_err(|e| bad(format!("`outer`: {e}")))?
                    .unwrap_or(BinOuter::Mean),
            },
            "polvar" => Statistic::Polvar {
                d: params
                    .get("d")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad("`polvar` needs numeric parameter `d`".into()))?,
                word_len: uint("word_len")?,
            },
            "permutation_entropy" => Statistic::PermutationEntropy {
                m: uint("m")?,
                tau: uint("tau")?,
            },
            "wavelet" => Statistic::Wavelet {
                level: uint("level")?,
                stat: params
                    .get("stat")
                    .cloned()
                    .map(serde_json::from_value)
                    .transpose()
                    .map_err(|e| bad(format!("`stat`: {e}")))?
                    .unwrap_or(WaveletStat::Mean),
            },
            other => return Err(bad(format!("unknown statistic `{other}`"))),
        };
        stat.validate(field)?;
        Ok(stat)
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            Statistic::Binned { n_bins, .. } => n_bins >= 2,
            Statistic::Polvar { d, word_len } => d > 0.0 && word_len >= 2,
            Statistic::PermutationEntropy { m, tau } => (3..=6).contains(&m) && tau >= 1,
            Statistic::Wavelet { level, .. } => level >= 1,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(field, format!("parameters out of range for `{}`", self.id())))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDescriptor {
    pub name: String,
    pub channel: Channel,
    /// Half-open slot range `[start, end)`.
    pub window: (usize, usize),
    pub statistic: Statistic,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescriptor {
    name: String,
    channel: String,
    window: (usize, usize),
    statistic: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, Value>,
}

/// Ordered list of feature descriptors; column order of the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    descriptors: Vec<FeatureDescriptor>,
}

impl Catalog {
    pub fn new(descriptors: Vec<FeatureDescriptor>) -> Result<Catalog> {
        let mut names = BTreeSet::new();
        for (i, d) in descriptors.iter().enumerate() {
            let field = format!("catalog[{i}]");
            if !names.insert(d.name.as_str()) {
                return Err(Error::config(field, format!("duplicate feature name `{}`", d.name)));
            }
            let (s, e) = d.window;
            if !(s < e && e <= SLOTS_PER_DAY) {
                return Err(Error::config(field, format!("window ({s}, {e}) outside 0..{SLOTS_PER_DAY}")));
            }
            d.statistic.validate(&field)?;
        }
        Ok(Catalog { descriptors })
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name.clone()).collect()
    }

    pub fn from_json(text: &str) -> Result<Catalog> {
        let raw: Vec<RawDescriptor> = serde_json::from_str(text)?;
        let mut out = Vec::with_capacity(raw.len());
        for (i, r) in raw.into_iter().enumerate() {
            let field = format!("catalog[{i}]");
            let channel = r
                .channel
                .parse::<Channel>()
                .map_err(|_| Error::config(format!("{field}.channel"), format!("unknown channel `{}`", r.channel)))?;
            out.push(FeatureDescriptor {
                statistic: Statistic::parse(&field, &r.statistic, &r.params)?,
                name: r.name,
                channel,
                window: r.window,
            });
        }
        Catalog::new(out)
    }

    pub fn to_json(&self) -> String {
        let raw: Vec<RawDescriptor> = self
            .descriptors
            .iter()
            .map(|d| RawDescriptor {
                name: d.name.clone(),
                channel: d.channel.to_string(),
                window: d.window,
                statistic: d.statistic.id().to_string(),
                params: d.statistic.params(),
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&raw).expect("catalog serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_json(&text)
    }

    /// Full-day, half-day and quarter-day windows; location/dispersion/trend
    /// on every window, the symbolic, entropy and wavelet features on the
    /// full day only.
    pub fn default_catalog() -> Catalog {
        Catalog::with_windows(&default_windows()).expect("default catalog is valid")
    }

    /// The default statistic set over caller-chosen windows. A window with an
    /// empty label is the unprefixed one.
    pub fn with_windows(windows: &[(String, (usize, usize))]) -> Result<Catalog> {
        let mut out = Vec::new();
        for channel in Channel::ALL {
            let name = |window: &str, stat: &str| {
                if window.is_empty() {
                    format!("{channel}_{stat}")
                } else {
                    format!("{channel}_{window}_{stat}")
                }
            };
            for (label, window) in windows {
                for (sid, stat) in [
                    ("mean", Statistic::Mean),
                    ("sd", Statistic::Sd),
                    ("min", Statistic::Min),
                    ("max", Statistic::Max),
                    ("slope", Statistic::Slope),
                ] {
                    out.push(FeatureDescriptor {
                        name: name(label, sid),
                        channel,
                        window: *window,
                        statistic: stat,
                    });
                }
            }
            let full = (0, SLOTS_PER_DAY);
            let mut full_day = vec![
                ("first".to_string(), Statistic::First),
                ("last".to_string(), Statistic::Last),
                ("range".to_string(), Statistic::Range),
                ("acf1".to_string(), Statistic::Acf1),
                (
                    "binned20_mean".to_string(),
                    Statistic::Binned {
                        n_bins: 20,
                        outer: BinOuter::Mean,
                    },
                ),
                (
                    "binned20_sd".to_string(),
                    Statistic::Binned {
                        n_bins: 20,
                        outer: BinOuter::Sd,
                    },
                ),
            ];
            for d in [3u32, 4, 5] {
                full_day.push((
                    format!("polvar_5_{d}"),
                    Statistic::Polvar {
                        d: f64::from(d),
                        word_len: 5,
                    },
                ));
            }
            for m in [4, 5] {
                full_day.push((format!("pe_{m}_2"), Statistic::PermutationEntropy { m, tau: 2 }));
            }
            full_day.push((
                "db3_l1_mean".to_string(),
                Statistic::Wavelet {
                    level: 1,
                    stat: WaveletStat::Mean,
                },
            ));
            full_day.push((
                "db3_l1_mean_abs".to_string(),
                Statistic::Wavelet {
                    level: 1,
                    stat: WaveletStat::MeanAbs,
                },
            ));
            for (sid, stat) in full_day {
                out.push(FeatureDescriptor {
                    name: format!("{channel}_{sid}"),
                    channel,
                    window: full,
                    statistic: stat,
                });
            }
        }
        Catalog::new(out)
    }
}

/// `("", full)`, `h1`/`h2` halves, `q1`..`q4` quarters.
pub fn default_windows() -> Vec<(String, (usize, usize))> {
    let mut w = vec![(String::new(), (0, SLOTS_PER_DAY))];
    for (label, parts) in [("h", 2), ("q", 4)] {
        let len = SLOTS_PER_DAY / parts;
        for i in 0..parts {
            w.push((format!("{label}{}", i + 1), (i * len, (i + 1) * len)));
        }
    }
    w
}
