//! Network topology, user placement, and channel generation.
//!
//! One macro base station sits at the origin; small stations are dropped
//! uniformly inside the macro disk with a mutual-separation guarantee, and
//! each station serves a configured number of users dropped uniformly in
//! its own disk. Channel power gains follow Rayleigh fading over a
//! power-law path loss: `gain = e * d^(2 xi)` with `e` a unit-mean
//! exponential draw and `d` the station-to-user distance in meters.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::{Error, Result};

/// Scenario parameters: geometry, population, spectrum, and radio constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Macro cell radius in meters.
    pub macro_radius_m: f64,
    /// Small cell radius in meters.
    pub small_radius_m: f64,
    /// Number of small stations (total stations = this + 1).
    pub num_small_cells: usize,
    /// Users served by each station, macro first; length must equal the
    /// station count.
    pub users_per_bs: Vec<usize>,
    /// Number of shared subcarriers.
    pub num_subcarriers: usize,
    /// Path-loss exponent `xi` in `d^xi` on the amplitude (negative in
    /// practice; the power gain scales as `d^(2 xi)`).
    pub pathloss_exponent: f64,
    /// Receiver noise power in watts, identical for every (user, subcarrier).
    pub noise_power_w: f64,
    /// Per-station transmit power budget in watts, macro first.
    pub p_max_w: Vec<f64>,
    /// Seed for topology and channel randomness.
    pub seed: u64,
}

impl NetworkConfig {
    /// Total number of stations.
    pub fn num_bs(&self) -> usize {
        self.num_small_cells + 1
    }

    /// Total number of users.
    pub fn num_users(&self) -> usize {
        self.users_per_bs.iter().sum()
    }

    /// Checks all configuration invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.macro_radius_m > self.small_radius_m && self.small_radius_m > 0.0) {
            return fail(format!(
                "radii must satisfy macro > small > 0, got {} and {}",
                self.macro_radius_m, self.small_radius_m
            ));
        }
        if self.users_per_bs.len() != self.num_bs() {
            return fail(format!(
                "users_per_bs has {} entries for {} stations",
                self.users_per_bs.len(),
                self.num_bs()
            ));
        }
        if self.users_per_bs.iter().any(|m| *m == 0) {
            return fail("every station must serve at least one user".into());
        }
        if self.num_subcarriers == 0 {
            return fail("num_subcarriers must be at least 1".into());
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return fail(format!("noise power must be positive, got {}", self.noise_power_w));
        }
        if self.p_max_w.len() != self.num_bs() {
            return fail(format!(
                "p_max_w has {} entries for {} stations",
                self.p_max_w.len(),
                self.num_bs()
            ));
        }
        if self.p_max_w.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return fail("every power budget must be positive and finite".into());
        }
        if !self.pathloss_exponent.is_finite() {
            return fail("pathloss exponent must be finite".into());
        }
        Ok(())
    }

    /// Parses the plain-text `key=value` scenario format. Blank lines and
    /// `#` comments are ignored; all nine keys are required and unknown
    /// keys are rejected.
    pub fn from_scenario_str(text: &str) -> Result<Self> {
        let mut macro_radius_m = None;
        let mut small_radius_m = None;
        let mut num_small_cells = None;
        let mut users_per_bs = None;
        let mut num_subcarriers = None;
        let mut pathloss_exponent = None;
        let mut noise_power_w = None;
        let mut p_max_w = None;
        let mut seed = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                Error::Parse(format!("line {}: invalid {what} value {value:?}", lineno + 1))
            };
            match key {
                "macro_radius_m" => {
                    macro_radius_m = Some(value.parse().map_err(|_| bad(key))?)
                }
                "small_radius_m" => {
                    small_radius_m = Some(value.parse().map_err(|_| bad(key))?)
                }
                "num_small_cells" => {
                    num_small_cells = Some(value.parse().map_err(|_| bad(key))?)
                }
                "users_per_bs" => {
                    users_per_bs = Some(parse_list::<usize>(value).map_err(|_| bad(key))?)
                }
                "num_subcarriers" => {
                    num_subcarriers = Some(value.parse().map_err(|_| bad(key))?)
                }
                "pathloss_exponent" => {
                    pathloss_exponent = Some(value.parse().map_err(|_| bad(key))?)
                }
                "noise_power_w" => noise_power_w = Some(value.parse().map_err(|_| bad(key))?),
                "p_max_w" => p_max_w = Some(parse_list::<f64>(value).map_err(|_| bad(key))?),
                "seed" => seed = Some(value.parse().map_err(|_| bad(key))?),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let missing = |what: &str| Error::Parse(format!("missing key {what:?}"));
        let cfg = NetworkConfig {
            macro_radius_m: macro_radius_m.ok_or_else(|| missing("macro_radius_m"))?,
            small_radius_m: small_radius_m.ok_or_else(|| missing("small_radius_m"))?,
            num_small_cells: num_small_cells.ok_or_else(|| missing("num_small_cells"))?,
            users_per_bs: users_per_bs.ok_or_else(|| missing("users_per_bs"))?,
            num_subcarriers: num_subcarriers.ok_or_else(|| missing("num_subcarriers"))?,
            pathloss_exponent: pathloss_exponent.ok_or_else(|| missing("pathloss_exponent"))?,
            noise_power_w: noise_power_w.ok_or_else(|| missing("noise_power_w"))?,
            p_max_w: p_max_w.ok_or_else(|| missing("p_max_w"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a scenario file from disk.
    pub fn from_scenario_file(path: &std::path::Path) -> Result<Self> {
        Self::from_scenario_str(&std::fs::read_to_string(path)?)
    }
}

impl Default for NetworkConfig {
    /// Two stations (macro + one small cell), two users each, eight
    /// subcarriers, 10 W / 2 W budgets, 500 m / 20 m radii.
    fn default() -> Self {
        NetworkConfig {
            macro_radius_m: 500.0,
            small_radius_m: 20.0,
            num_small_cells: 1,
            users_per_bs: vec![2, 2],
            num_subcarriers: 8,
            pathloss_exponent: -2.0,
            noise_power_w: 1e-12,
            p_max_w: vec![10.0, 2.0],
            seed: 1,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, ()> {
    value.split(',').map(|v| v.trim().parse().map_err(|_| ())).collect()
}

/// Station and user coordinates plus the fixed user-to-station association.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Station positions in meters; index 0 is the macro station at the
    /// origin.
    pub bs_positions: Vec<[f64; 2]>,
    /// User positions in meters, in global user order (macro users first).
    pub user_positions: Vec<[f64; 2]>,
    /// Serving station index per user.
    pub association: Vec<usize>,
}

/// Channel power gains and noise for every (station, user, subcarrier)
/// triple, including non-serving pairs (cross-cell interference needs them),
/// plus the serving sets derived from the topology.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// Station count.
    pub num_bs: usize,
    /// Global user count.
    pub num_users: usize,
    /// Subcarrier count.
    pub num_subcarriers: usize,
    /// `|h|^2` power gain, flat layout `(f * num_users + m) * num_subcarriers + n`.
    pub gain: Vec<f64>,
    /// Noise power in watts, same layout.
    pub noise: Vec<f64>,
    /// Users served by each station, ascending global index.
    pub users_of_bs: Vec<Vec<usize>>,
}

impl ChannelState {
    #[inline]
    pub(crate) fn idx(&self, f: usize, m: usize, n: usize) -> usize {
        (f * self.num_users + m) * self.num_subcarriers + n
    }

    /// Power gain from station `f` to user `m` on subcarrier `n`.
    #[inline]
    pub fn gain(&self, f: usize, m: usize, n: usize) -> f64 {
        self.gain[self.idx(f, m, n)]
    }

    /// Noise power of user `m` on subcarrier `n` under station `f`.
    #[inline]
    pub fn noise(&self, f: usize, m: usize, n: usize) -> f64 {
        self.noise[self.idx(f, m, n)]
    }
}

fn sample_in_disk(rng: &mut impl Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Places stations and users. Small-station centers are drawn uniformly in
/// the macro disk, redrawn until every pair is at least two small-cell radii
/// apart; users are drawn uniformly in their serving station's disk.
///
/// Fails with [`Error::Topology`] when 10,000 redraws cannot satisfy the
/// separation constraint (the configuration is too dense).
pub fn generate_topology(cfg: &NetworkConfig, rng: &mut impl Rng) -> Result<Topology> {
    cfg.validate()?;
    let mut bs_positions = vec![[0.0, 0.0]];
    let min_sep = 2.0 * cfg.small_radius_m;
    let mut retries = 0usize;
    while bs_positions.len() < cfg.num_bs() {
        let candidate = sample_in_disk(rng, [0.0, 0.0], cfg.macro_radius_m);
        let clear = bs_positions[1..].iter().all(|p| dist(*p, candidate) >= min_sep);
        if clear {
            bs_positions.push(candidate);
        } else {
            retries += 1;
            if retries > 10_000 {
                return Err(Error::Topology(format!(
                    "could not place {} small cells with separation {min_sep} m inside a {} m disk",
                    cfg.num_small_cells, cfg.macro_radius_m
                )));
            }
        }
    }
    let mut user_positions = Vec::with_capacity(cfg.num_users());
    let mut association = Vec::with_capacity(cfg.num_users());
    for (f, &count) in cfg.users_per_bs.iter().enumerate() {
        let radius = if f == 0 { cfg.macro_radius_m } else { cfg.small_radius_m };
        for _ in 0..count {
            user_positions.push(sample_in_disk(rng, bs_positions[f], radius));
            association.push(f);
        }
    }
    Ok(Topology { bs_positions, user_positions, association })
}

/// Power gain of a single link: unit-mean exponential fading over power-law
/// path loss, with the distance floored at 1 m to keep the law finite.
pub fn pathloss_gain(fading: f64, distance_m: f64, xi: f64) -> f64 {
    fading * distance_m.max(1.0).powf(2.0 * xi)
}

fn unit_exponential(rng: &mut impl Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Draws channel gains for every (station, user, subcarrier) triple and
/// fills in the configured noise power.
pub fn generate_channels(
    topo: &Topology,
    cfg: &NetworkConfig,
    rng: &mut impl Rng,
) -> Result<ChannelState> {
    cfg.validate()?;
    let num_bs = cfg.num_bs();
    let num_users = cfg.num_users();
    if topo.bs_positions.len() != num_bs || topo.user_positions.len() != num_users {
        return Err(Error::Config(format!(
            "topology has {} stations / {} users, config expects {num_bs} / {num_users}",
            topo.bs_positions.len(),
            topo.user_positions.len()
        )));
    }
    let n_sc = cfg.num_subcarriers;
    let mut gain = Vec::with_capacity(num_bs * num_users * n_sc);
    for f in 0..num_bs {
        for m in 0..num_users {
            let d = dist(topo.bs_positions[f], topo.user_positions[m]);
            for _ in 0..n_sc {
                gain.push(pathloss_gain(unit_exponential(rng), d, cfg.pathloss_exponent));
            }
        }
    }
    let noise = vec![cfg.noise_power_w; num_bs * num_users * n_sc];
    let mut users_of_bs = vec![Vec::new(); num_bs];
    for (m, &f) in topo.association.iter().enumerate() {
        users_of_bs[f].push(m);
    }
    Ok(ChannelState { num_bs, num_users, num_subcarriers: n_sc, gain, noise, users_of_bs })
}

/// Seeds a stream from the config and generates topology plus channels in
/// one deterministic pass.
pub fn generate_scenario(cfg: &NetworkConfig) -> Result<(Topology, ChannelState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topo = generate_topology(cfg, &mut rng)?;
    let channels = generate_channels(&topo, cfg, &mut rng)?;
    Ok((topo, channels))
}
