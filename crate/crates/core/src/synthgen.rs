//! Synthetic surgical datasets with tunable element coupling.
//!
//! Sampling is hierarchical. Phases run in a fixed order. Within a phase
//! the right hand's structure follows a first-order Markov chain, its
//! instrument is drawn from a structure-conditioned distribution, and its
//! verb from an (instrument, structure)-conditioned one. Each dependency
//! is a mixture: with probability `coupling.<kind>` the conditioned draw
//! is used, otherwise the label is uniform over its kind. The left hand
//! works from a small support set of instruments and verbs and tends to
//! share the right hand's structure. Durations are log-normal with a
//! per-instrument scale.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::workflow::{ActivityTuple, Dataset, Intervention, Phase, Token, Vocabulary, POSITIONS};

const TAG_WORLD: u64 = 0x574f_524c_44;
const TAG_INTERVENTION: u64 = 0x4956;
const TAG_COUNTS: u64 = 0x434e_54;

/// Share of (phase, structure) cells in which the left hand rests.
const LEFT_IDLE: f64 = 0.15;
/// Probability that the left hand works on the right hand's structure.
const LEFT_SHARES_STRUCTURE: f64 = 0.95;
/// Share of the instrument vocabulary a phase draws its right-hand instruments from.
const INSTRUMENT_POOL: f64 = 0.3;
/// How fast the primary instrument's weight falls as instrument coupling
/// drops: weight = 1 - PRIMARY_SLOPE * (1 - coupling), at least 1/2.
const PRIMARY_SLOPE: f64 = 2.5;
/// Share of (instrument, structure) pairs whose verb is the instrument's default verb.
const INSTRUMENT_DEFAULT_VERB: f64 = 0.75;
/// Share of the verb vocabulary that serves as some instrument's default verb.
const DEFAULT_VERB_POOL: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// Determinism of verb given (instrument, structure).
    pub verb: f64,
    /// Determinism of instrument given (structure, phase).
    pub instrument: f64,
    /// Determinism of structure given (previous structure, phase).
    pub structure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationLaw {
    /// Mean of log-seconds.
    pub mu: f64,
    /// Standard deviation of log-seconds around the instrument's scale.
    pub sigma: f64,
    /// Standard deviation of the per-instrument log-scale offsets.
    pub instrument_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub site: String,
    pub n_interventions: usize,
    pub n_phases: usize,
    pub activities_mean: f64,
    pub activities_sd: f64,
    pub n_verbs: usize,
    pub n_instruments: usize,
    pub n_structures: usize,
    pub coupling: Coupling,
    pub duration: DurationLaw,
    pub n_surgeons: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_interventions", self.n_interventions),
            ("n_phases", self.n_phases),
            ("n_verbs", self.n_verbs),
            ("n_instruments", self.n_instruments),
            ("n_structures", self.n_structures),
            ("n_surgeons", self.n_surgeons),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        let c = self.coupling;
        for (name, v) in [("verb", c.verb), ("instrument", c.instrument), ("structure", c.structure)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("coupling.{name} = {v} is outside [0, 1]")));
            }
        }
        if !(self.activities_mean >= 1.0) || !(self.activities_sd >= 0.0) {
            return Err(Error::InvalidArgument("activities mean must be >= 1 and sd >= 0".into()));
        }
        let d = self.duration;
        if !d.mu.is_finite() || !(d.sigma >= 0.0) || !(d.instrument_spread >= 0.0) {
            return Err(Error::InvalidArgument("invalid duration law".into()));
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 7] = ["ACDF.L", "ACDF.R", "LDH.L", "LDH.R", "PA.L", "PA.R", "CS"];

/// Generator spec sized after one of the seven reference datasets.
pub fn preset(name: &str) -> Result<GeneratorSpec> {
    // surgeons, interventions, duration (min) mean/sd, activities mean/sd,
    // phases, verbs, instruments, structures
    let row: (usize, usize, f64, f64, f64, f64, usize, usize, usize, usize) = match name {
        "ACDF.L" => (4, 16, 156.0, 61.0, 367.0, 149.0, 5, 12, 25, 11),
        "ACDF.R" => (5, 48, 85.0, 26.0, 244.0, 76.0, 5, 12, 30, 7),
        "LDH.L" => (6, 25, 80.0, 26.0, 242.0, 72.0, 4, 12, 27, 10),
        "LDH.R" => (5, 20, 34.0, 14.0, 148.0, 49.0, 4, 11, 23, 8),
        "PA.L" => (2, 15, 78.0, 21.0, 266.0, 77.0, 5, 15, 32, 7),
        "PA.R" => (1, 11, 58.0, 22.0, 213.0, 46.0, 6, 15, 30, 9),
        "CS" => (2, 19, 12.0, 3.0, 29.0, 5.0, 7, 12, 15, 7),
        _ => return Err(Error::UnknownPreset(name.to_owned())),
    };
    let (surgeons, n, dur_mean, _dur_sd, act_mean, act_sd, phases, nv, ni, ns) = row;
    let (site, coupling) = match name.rsplit('.').next() {
        Some("L") => ("Leipzig", Coupling { verb: 0.96, instrument: 0.88, structure: 0.35 }),
        Some("R") => ("Rennes", Coupling { verb: 0.98, instrument: 0.92, structure: 0.4 }),
        _ => ("Munich", Coupling { verb: 0.999, instrument: 0.995, structure: 0.99 }),
    };
    let sigma = 0.5;
    let instrument_spread = 0.6;
    let mean_seconds = dur_mean * 60.0 / act_mean;
    let mu = mean_seconds.ln() - (sigma * sigma + instrument_spread * instrument_spread) / 2.0;
    Ok(GeneratorSpec {
        name: name.to_owned(),
        site: site.to_owned(),
        n_interventions: n,
        n_phases: phases,
        activities_mean: act_mean,
        activities_sd: act_sd,
        n_verbs: nv,
        n_instruments: ni,
        n_structures: ns,
        coupling,
        duration: DurationLaw { mu, sigma, instrument_spread },
        n_surgeons: surgeons,
        seed: seed::tag(name),
    })
}

/// Fixed conditional tables shared by every intervention of a dataset.
struct World {
    /// Successor structure per (phase, structure).
    successor: Vec<Vec<usize>>,
    /// Structures a phase starts from.
    phase_pool: Vec<Vec<usize>>,
    /// (primary, secondary) right-hand instrument per (phase, structure).
    instruments: Vec<Vec<(usize, usize)>>,
    /// Preferred verb per (instrument, structure).
    verb_of: Vec<Vec<usize>>,
    /// Left-hand instrument support and its per-phase preference.
    left_support: Vec<usize>,
    left_pref: Vec<usize>,
    /// Whether the left hand rests, per (phase, structure).
    left_idle: Vec<Vec<bool>>,
    /// Log-scale offset of the duration per instrument.
    duration_offset: Vec<f64>,
}

impl World {
    fn new(spec: &GeneratorSpec) -> World {
        let mut rng = seed::rng(spec.seed, &[TAG_WORLD]);
        let (nv, ni, ns) = (spec.n_verbs, spec.n_instruments, spec.n_structures);

        let pool_size = ((ns as f64 * 0.6).ceil() as usize).clamp(1, ns);
        let mut phase_pool = Vec::with_capacity(spec.n_phases);
        let mut successor = Vec::with_capacity(spec.n_phases);
        for _ in 0..spec.n_phases {
            let mut all: Vec<usize> = (0..ns).collect();
            all.shuffle(&mut rng);
            let pool: Vec<usize> = all[..pool_size].to_vec();
            let mut succ = vec![0; ns];
            for (k, &s) in pool.iter().enumerate() {
                succ[s] = pool[(k + 1) % pool.len()];
            }
            for &s in &all[pool_size..] {
                succ[s] = *pool.choose(&mut rng).unwrap();
            }
            phase_pool.push(pool);
            successor.push(succ);
        }

        let instr_pool_size = ((ni as f64 * INSTRUMENT_POOL).round() as usize).clamp(1, ni);
        let instruments = (0..spec.n_phases)
            .map(|_| {
                let mut all: Vec<usize> = (0..ni).collect();
                all.shuffle(&mut rng);
                let pool = &all[..instr_pool_size];
                (0..ns)
                    .map(|_| {
                        let a = *pool.choose(&mut rng).unwrap();
                        let b = *pool.choose(&mut rng).unwrap();
                        (a, b)
                    })
                    .collect()
            })
            .collect();

        let left_support: Vec<usize> = (0..ni.min(3)).collect();
        let left_verbs: Vec<usize> = (0..nv.min(2)).collect();
        let verb_pool = ((nv as f64 * DEFAULT_VERB_POOL).round() as usize).clamp(1, nv);
        let default_verb: Vec<usize> = (0..ni)
            .map(|i| {
                if left_support.contains(&i) {
                    left_verbs[i % left_verbs.len()]
                } else {
                    rng.random_range(0..verb_pool)
                }
            })
            .collect();
        let verb_of = (0..ni)
            .map(|i| {
                (0..ns)
                    .map(|_| {
                        if left_support.contains(&i) || rng.random_bool(INSTRUMENT_DEFAULT_VERB) {
                            default_verb[i]
                        } else {
                            rng.random_range(0..nv)
                        }
                    })
                    .collect()
            })
            .collect();
        let left_pref = (0..spec.n_phases).map(|_| *left_support.choose(&mut rng).unwrap()).collect();
        let left_idle =
            (0..spec.n_phases).map(|_| (0..ns).map(|_| rng.random_bool(LEFT_IDLE)).collect()).collect();
        let duration_offset = (0..ni)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * spec.duration.instrument_spread
            })
            .collect();
        World { successor, phase_pool, instruments, verb_of, left_support, left_pref, left_idle, duration_offset }
    }
}

/// Activity counts whose sample mean and sd hit the targets exactly (up to rounding).
fn activity_counts(spec: &GeneratorSpec) -> Vec<usize> {
    let mut rng = seed::rng(spec.seed, &[TAG_COUNTS]);
    let n = spec.n_interventions;
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    z.iter()
        .map(|&x| {
            let std = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
            let c = (spec.activities_mean + spec.activities_sd * std).round();
            (c.max(spec.n_phases as f64).max(1.0)) as usize
        })
        .collect()
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn tok(k: usize) -> Token {
    Token(k as u32 + Token::RESERVED)
}

fn pick(rng: &mut Rng, coupling: f64, preferred: usize, n: usize) -> usize {
    if rng.random_bool(coupling) {
        preferred
    } else {
        rng.random_range(0..n)
    }
}

fn generate_intervention(spec: &GeneratorSpec, world: &World, k: usize, target: usize) -> Intervention {
    let mut rng = seed::rng(spec.seed, &[TAG_INTERVENTION, k as u64]);
    let c = spec.coupling;
    let (nv, ni, ns) = (spec.n_verbs, spec.n_instruments, spec.n_structures);
    let law = spec.duration;

    // split the activity budget across phases
    let weights: Vec<f64> = (0..spec.n_phases).map(|_| rng.random_range(0.5..1.5)).collect();
    let total_w: f64 = weights.iter().sum();
    let mut per_phase: Vec<usize> =
        weights.iter().map(|w| ((w / total_w) * target as f64).floor().max(1.0) as usize).collect();
    let assigned: usize = per_phase.iter().sum();
    if assigned < target {
        per_phase[spec.n_phases - 1] += target - assigned;
    }

    let mut activities: Vec<ActivityTuple> = Vec::with_capacity(target);
    let mut phases = Vec::with_capacity(spec.n_phases);
    let mut t = 0.0f64;
    for (p, &count) in per_phase.iter().enumerate() {
        let phase_start = t;
        let mut structure = *world.phase_pool[p].choose(&mut rng).unwrap();
        let mut made = 0;
        let mut attempts = 0;
        while made < count && attempts < count * 50 {
            attempts += 1;
            if made > 0 || attempts > 1 {
                structure = pick(&mut rng, c.structure, world.successor[p][structure], ns);
            }
            let (primary, secondary) = world.instruments[p][structure];
            let primary_weight = (1.0 - PRIMARY_SLOPE * (1.0 - c.instrument)).max(0.5);
            let preferred = if rng.random_bool(primary_weight) { primary } else { secondary };
            let ri = pick(&mut rng, c.instrument, preferred, ni);
            let rv = pick(&mut rng, c.verb, world.verb_of[ri][structure], nv);

            let idle = if rng.random_bool(c.instrument) {
                world.left_idle[p][structure]
            } else {
                rng.random_bool(LEFT_IDLE)
            };
            let left = if idle {
                [Token::NONE; 3]
            } else {
                let ls = if rng.random_bool(LEFT_SHARES_STRUCTURE.max(c.structure)) {
                    structure
                } else {
                    rng.random_range(0..ns)
                };
                let li = if rng.random_bool(c.instrument) {
                    world.left_pref[p]
                } else {
                    *world.left_support.choose(&mut rng).unwrap()
                };
                let lv = pick(&mut rng, c.verb, world.verb_of[li][ls], nv);
                [tok(lv), tok(li), tok(ls)]
            };
            let items: [Token; POSITIONS] =
                [left[0], left[1], left[2], tok(rv), tok(ri), tok(structure)];
            if activities.last().is_some_and(|a| a.items == items) {
                continue;
            }
            let scale = LogNormal::new(law.mu + world.duration_offset[ri], law.sigma).unwrap();
            let end = t + scale.sample(&mut rng);
            activities.push(ActivityTuple::new(items, t, end));
            t = end;
            made += 1;
        }
        if t > phase_start {
            phases.push(Phase { name: format!("phase_{}", p + 1), t_start: phase_start, t_end: t });
        }
    }

    Intervention {
        id: format!("{}-{:03}", spec.name, k + 1),
        site: spec.site.clone(),
        surgeon_id: format!("surgeon_{}", k % spec.n_surgeons + 1),
        phases,
        activities,
    }
}

fn vocabulary(spec: &GeneratorSpec) -> Vocabulary {
    let mut v = Vocabulary::default();
    for k in 0..spec.n_verbs {
        v.verbs.intern(&format!("verb_{k:02}")).unwrap();
    }
    for k in 0..spec.n_instruments {
        v.instruments.intern(&format!("instrument_{k:02}")).unwrap();
    }
    for k in 0..spec.n_structures {
        v.structures.intern(&format!("structure_{k:02}")).unwrap();
    }
    v
}

/// Scales all times by `factor` and rounds boundaries to milliseconds,
/// keeping every activity at least 1 ms long.
fn rescale(iv: &mut Intervention, factor: f64) {
    let mut moved: Vec<(f64, f64)> = Vec::with_capacity(iv.activities.len() + 1);
    let mut prev = 0.0;
    for a in &mut iv.activities {
        let start = prev;
        let end = round_ms(a.t_end * factor).max(round_ms(start + 0.001));
        moved.push((a.t_start, start));
        a.t_start = start;
        a.t_end = end;
        prev = end;
    }
    // phase boundaries coincide with activity starts, except the final end
    let lookup = |old: f64| moved.iter().find(|(o, _)| *o == old).map_or(prev, |(_, n)| *n);
    for ph in &mut iv.phases {
        ph.t_start = lookup(ph.t_start);
        ph.t_end = lookup(ph.t_end);
    }
}

/// Generates a dataset; a pure function of `spec` (including its seed).
///
/// Durations are rescaled dataset-wide so that the mean activity duration
/// equals the mean of the duration law, whatever instruments were drawn.
pub fn generate_dataset(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let world = World::new(spec);
    let counts = activity_counts(spec);
    let mut interventions: Vec<Intervention> = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| generate_intervention(spec, &world, k, n))
        .collect();
    let law = spec.duration;
    let target = (law.mu + (law.sigma.powi(2) + law.instrument_spread.powi(2)) / 2.0).exp();
    let (total, n): (f64, usize) = interventions
        .iter()
        .fold((0.0, 0), |(t, n), iv| (t + iv.horizon(), n + iv.activities.len()));
    let factor = if total > 0.0 { target * n as f64 / total } else { 1.0 };
    for iv in &mut interventions {
        rescale(iv, factor);
    }
    Ok(Dataset { name: spec.name.clone(), interventions, vocab: vocabulary(spec) })
}
