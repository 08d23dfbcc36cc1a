use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::arbitration::{rank_of, EnsembleFusion};
use crate::streams::{ClassLog, ClassRecord};

/// Truth plus ten distinct distractor classes per record.
pub const MIN_CLASSES: u32 = 11;

/// Rank masses for the top-5 entries of a probability vector; the leftover
/// 0.12 is spread evenly over the remaining classes. No value repeats across
/// templates, which keeps fused scores free of accidental ties.
const TEMPLATES: [[f64; 5]; 3] = [
    [0.61, 0.13, 0.07, 0.045, 0.025],
    [0.35, 0.25, 0.14, 0.09, 0.05],
    [0.23, 0.21, 0.19, 0.15, 0.10],
];

const TIE_EPS: f64 = 1e-12;

/// Joint counts requested for a synthetic classification log.
///
/// `fail1`/`fail5` count records whose truth is outside the primary top-1 /
/// top-5, `disagree` counts top-1 mismatches, and `tp1`/`tp5` count
/// disagreeing records among those failures. The optional targets pin the
/// secondary system's and the mean-probability ensemble's failure counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassLogSpec {
    pub n: usize,
    pub num_classes: u32,
    pub fail1: usize,
    pub fail5: usize,
    pub disagree: usize,
    pub tp1: usize,
    pub tp5: usize,
    pub seed: u64,
    #[serde(default)]
    pub secondary_fail1: Option<usize>,
    #[serde(default)]
    pub secondary_fail5: Option<usize>,
    #[serde(default)]
    pub ensemble_fail1: Option<usize>,
    #[serde(default)]
    pub ensemble_fail5: Option<usize>,
    #[serde(default)]
    pub with_probs: bool,
}

impl ClassLogSpec {
    /// The ImageNet-validation-sized reference: 50000 items, 1000 classes,
    /// primary error 25.2/8.0, secondary 29.0/10.1, 11645 disagreements.
    pub fn reference(seed: u64) -> Self {
        ClassLogSpec {
            n: 50_000,
            num_classes: 1000,
            fail1: 12_600,
            fail5: 4_000,
            disagree: 11_645,
            tp1: 7_258,
            tp5: 2_584,
            seed,
            secondary_fail1: Some(14_500),
            secondary_fail5: Some(5_050),
            ensemble_fail1: None,
            ensemble_fail5: None,
            with_probs: false,
        }
    }

    /// The reference counts with probability vectors over a small class set,
    /// tuned so mean fusion errs on 24.4% / 7.8% of items.
    pub fn reference_with_probs(seed: u64, num_classes: u32) -> Self {
        ClassLogSpec {
            num_classes,
            ensemble_fail1: Some(12_200),
            ensemble_fail5: Some(3_900),
            with_probs: true,
            ..Self::reference(seed)
        }
    }

    /// Checks the count invariants and returns the six primary cells.
    pub fn cells(&self) -> Result<CellCounts, SynthError> {
        let fail = |msg: String| Err(SynthError::Infeasible(msg));
        if self.num_classes < MIN_CLASSES {
            return fail(format!(
                "num_classes {} below the generator minimum {MIN_CLASSES}",
                self.num_classes
            ));
        }
        let checks = [
            (self.fail5 <= self.fail1, "fail5 <= fail1"),
            (self.fail1 <= self.n, "fail1 <= n"),
            (self.disagree <= self.n, "disagree <= n"),
            (self.tp5 <= self.tp1, "tp5 <= tp1"),
            (self.tp1 <= self.disagree, "tp1 <= disagree"),
            (self.tp1 <= self.fail1, "tp1 <= fail1"),
            (self.tp5 <= self.fail5, "tp5 <= fail5"),
            (
                self.fail1 - self.tp1.min(self.fail1) >= self.fail5 - self.tp5.min(self.fail5),
                "fail1 - tp1 >= fail5 - tp5",
            ),
            (
                self.n - self.disagree.min(self.n) >= self.fail1 - self.tp1.min(self.fail1),
                "n - disagree >= fail1 - tp1",
            ),
        ];
        if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
            return fail(format!("violates {what}"));
        }
        for (target, name) in [
            (self.secondary_fail5.zip(self.secondary_fail1), "secondary_fail5 <= secondary_fail1"),
            (self.ensemble_fail5.zip(self.ensemble_fail1), "ensemble_fail5 <= ensemble_fail1"),
        ] {
            if let Some((f5, f1)) = target {
                if f5 > f1 {
                    return fail(format!("violates {name}"));
                }
            }
        }
        if !self.with_probs && (self.ensemble_fail1.is_some() || self.ensemble_fail5.is_some()) {
            return fail("ensemble targets require with_probs".into());
        }
        Ok(CellCounts {
            agree_ok: self.n - self.disagree - (self.fail1 - self.tp1),
            agree_fail1_only: (self.fail1 - self.tp1) - (self.fail5 - self.tp5),
            agree_fail5: self.fail5 - self.tp5,
            disagree_ok: self.disagree - self.tp1,
            disagree_fail1_only: self.tp1 - self.tp5,
            disagree_fail5: self.tp5,
        })
    }

    fn targets(&self) -> [Option<usize>; 4] {
        [
            self.secondary_fail1,
            self.secondary_fail5,
            self.ensemble_fail1,
            self.ensemble_fail5,
        ]
    }
}

/// Records per (agreement, primary outcome) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub agree_ok: usize,
    pub agree_fail1_only: usize,
    pub agree_fail5: usize,
    pub disagree_ok: usize,
    pub disagree_fail1_only: usize,
    pub disagree_fail5: usize,
}

impl CellCounts {
    fn as_array(&self) -> [usize; 6] {
        [
            self.agree_ok,
            self.agree_fail1_only,
            self.agree_fail5,
            self.disagree_ok,
            self.disagree_fail1_only,
            self.disagree_fail5,
        ]
    }
}

/// Class slots: 0 is the truth, 1..=10 are the record's distractors.
type Slots = [u8; 5];

fn primary_slots(cell: usize) -> Slots {
    match cell % 3 {
        0 => [0, 1, 2, 3, 4],
        1 => [1, 0, 2, 3, 4],
        _ => [1, 2, 3, 4, 5],
    }
}

fn disagrees(cell: usize) -> bool {
    cell >= 3
}

fn secondary_candidates(cell: usize) -> Vec<Slots> {
    let p = primary_slots(cell);
    let mut out = Vec::new();
    for s0 in [0u8, 1, 2, 6] {
        if disagrees(cell) == (s0 == p[0]) {
            continue;
        }
        let truth_positions: &[Option<usize>] = if s0 == 0 {
            &[Some(0)]
        } else {
            &[Some(1), Some(4), None]
        };
        for &truth_at in truth_positions {
            for shared in [true, false] {
                let pool: Vec<u8> = if shared {
                    p.iter().copied().chain(6..=10).collect()
                } else {
                    (6..=10).chain(1..=5).collect()
                };
                let mut fill = pool.into_iter().filter(|&c| c != 0 && c != s0);
                let mut list = [u8::MAX; 5];
                list[0] = s0;
                if let Some(pos) = truth_at {
                    list[pos] = 0;
                }
                for slot in list.iter_mut().filter(|s| **s == u8::MAX) {
                    *slot = fill.next().expect("pool has ten classes");
                }
                if !out.contains(&list) {
                    out.push(list);
                }
            }
        }
    }
    out
}

fn probs(classes: [u32; 5], template: &[f64; 5], num_classes: u32) -> Vec<f64> {
    let tail = (1.0 - template.iter().sum::<f64>()) / (num_classes - 5) as f64;
    let mut v = vec![tail; num_classes as usize];
    for (&c, &m) in classes.iter().zip(template) {
        v[c as usize] = m;
    }
    v
}

/// (secondary fails top-1, secondary fails top-5, ensemble fails top-1,
/// ensemble fails top-5)
type Outcome = [bool; 4];

#[derive(Clone, Copy, Debug)]
struct Config {
    secondary: Slots,
    primary_template: usize,
    secondary_template: usize,
}

/// Whether the truth ranks outside the top `k` regardless of how ties
/// between equal scores are broken, or `None` if that depends on indices.
fn robust_miss(scores: &[f64], truth: usize, k: usize) -> Option<bool> {
    let v = scores[truth];
    let above = scores.iter().filter(|&&s| s > v + TIE_EPS).count();
    let ties = scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| i != truth && (s - v).abs() <= TIE_EPS)
        .count();
    if above >= k {
        Some(true)
    } else if above + ties < k {
        Some(false)
    } else {
        None
    }
}

fn evaluate_config(cell: usize, cfg: &Config, num_classes: u32, with_probs: bool) -> Option<Outcome> {
    let s = cfg.secondary;
    let sf1 = s[0] != 0;
    let sf5 = !s.contains(&0);
    if !with_probs {
        return Some([sf1, sf5, false, false]);
    }
    let p = probs(primary_slots(cell).map(u32::from), &TEMPLATES[cfg.primary_template], num_classes);
    let q = probs(s.map(u32::from), &TEMPLATES[cfg.secondary_template], num_classes);
    let fused = EnsembleFusion::default().fuse(&p, &q);
    Some([sf1, sf5, robust_miss(&fused, 0, 1)?, robust_miss(&fused, 0, 5)?])
}

/// Distinct achievable outcomes per cell, each with one configuration that
/// realizes it, sorted by outcome.
fn cell_options(num_classes: u32, with_probs: bool) -> Vec<Vec<(Outcome, Config)>> {
    (0..6)
        .map(|cell| {
            let mut opts: Vec<(Outcome, Config)> = Vec::new();
            for secondary in secondary_candidates(cell) {
                for primary_template in 0..TEMPLATES.len() {
                    for secondary_template in 0..TEMPLATES.len() {
                        let cfg = Config {
                            secondary,
                            primary_template,
                            secondary_template,
                        };
                        if let Some(out) = evaluate_config(cell, &cfg, num_classes, with_probs) {
                            if !opts.iter().any(|(o, _)| *o == out) {
                                opts.push((out, cfg));
                            }
                        }
                    }
                }
            }
            opts.sort_by_key(|(o, _)| *o);
            opts
        })
        .collect()
}

/// A bulk step: move records of `cell` from option `from` to option `to`.
#[derive(Clone, Copy, Debug)]
struct Move {
    cell: usize,
    from: usize,
    to: usize,
    delta: [i64; 4],
}

/// Spreads each cell's records over its options so that the outcome totals
/// meet every pinned target. Starts from each cell's first option and
/// descends on the summed absolute deficit, applying at each round the bulk
/// step (one, two or three moves applied together, fewest first) that lowers
/// it the most. Fails when no step lowers it.
fn allocate(
    cells: [usize; 6],
    options: &[Vec<(Outcome, Config)>],
    targets: [Option<usize>; 4],
) -> Result<Vec<Vec<usize>>, SynthError> {
    let mut counts: Vec<Vec<usize>> = options
        .iter()
        .zip(cells)
        .map(|(opts, n)| {
            let mut c = vec![0; opts.len()];
            c[0] = n;
            c
        })
        .collect();
    let mut moves = Vec::new();
    for (cell, opts) in options.iter().enumerate() {
        for from in 0..opts.len() {
            for to in 0..opts.len() {
                if from != to {
                    let delta: [i64; 4] = std::array::from_fn(|i| {
                        if targets[i].is_some() {
                            opts[to].0[i] as i64 - opts[from].0[i] as i64
                        } else {
                            0
                        }
                    });
                    if delta != [0; 4] {
                        moves.push(Move { cell, from, to, delta });
                    }
                }
            }
        }
    }
    let mut deficit = [0i64; 4];
    for (i, d) in deficit.iter_mut().enumerate() {
        if let Some(t) = targets[i] {
            *d = t as i64 - cells.iter().zip(options).map(|(&n, o)| o[0].0[i] as i64 * n as i64).sum::<i64>();
        }
    }

    loop {
        let cost: i64 = deficit.iter().map(|d| d.abs()).sum();
        if cost == 0 {
            return Ok(counts);
        }
        let mut best: Option<(i64, i64, Vec<usize>)> = None;
        for arity in 1..=3 {
            let mut combo = vec![0usize; arity];
            search(&moves, &counts, &deficit, cost, &mut combo, 0, 0, &mut best);
            if best.is_some() {
                break;
            }
        }
        let Some((_, q, combo)) = best else {
            return Err(SynthError::Infeasible(format!(
                "secondary/ensemble targets unreachable (remaining deficit {deficit:?})"
            )));
        };
        for m in combo.iter().map(|&i| moves[i]) {
            counts[m.cell][m.from] -= q as usize;
            counts[m.cell][m.to] += q as usize;
            for (d, md) in deficit.iter_mut().zip(m.delta) {
                *d -= md * q;
            }
        }
    }
}

/// Enumerates non-decreasing move combinations of `combo.len()` and keeps
/// the one (with its best bulk quantity) lowering the deficit the most.
#[allow(clippy::too_many_arguments)]
fn search(
    moves: &[Move],
    counts: &[Vec<usize>],
    deficit: &[i64; 4],
    cost: i64,
    combo: &mut Vec<usize>,
    depth: usize,
    first: usize,
    best: &mut Option<(i64, i64, Vec<usize>)>,
) {
    if depth == combo.len() {
        let mut delta = [0i64; 4];
        for &i in combo.iter() {
            for (d, md) in delta.iter_mut().zip(moves[i].delta) {
                *d += md;
            }
        }
        if delta == [0; 4] {
            return;
        }
        // records drawn from each source bucket per unit step
        let mut supply = i64::MAX;
        for &i in combo.iter() {
            let m = moves[i];
            let uses = combo
                .iter()
                .filter(|&&j| (moves[j].cell, moves[j].from) == (m.cell, m.from))
                .count() as i64;
            supply = supply.min(counts[m.cell][m.from] as i64 / uses);
        }
        if supply == 0 {
            return;
        }
        let at = |q: i64| -> i64 { (0..4).map(|i| (deficit[i] - q * delta[i]).abs()).sum() };
        let mut qs = vec![1, supply];
        for i in 0..4 {
            if delta[i] != 0 {
                let b = deficit[i] / delta[i];
                qs.extend([b, b + 1]);
            }
        }
        for q in qs {
            if (1..=supply).contains(&q) {
                let gain = cost - at(q);
                if gain > 0 && best.as_ref().is_none_or(|b| gain > b.0) {
                    *best = Some((gain, q, combo.clone()));
                }
            }
        }
        return;
    }
    for i in first..moves.len() {
        if counts[moves[i].cell][moves[i].from] == 0 {
            continue;
        }
        combo[depth] = i;
        search(moves, counts, deficit, cost, combo, depth + 1, i, best);
    }
}

/// Builds a log matching `spec`'s counts exactly. Truth labels are assigned
/// round-robin over item order; cell membership and distractor classes come
/// from a ChaCha8 stream seeded with `spec.seed`.
pub fn gen_class_log(spec: &ClassLogSpec) -> Result<ClassLog, SynthError> {
    let cells = spec.cells()?.as_array();
    let options = cell_options(spec.num_classes, spec.with_probs);
    let counts = allocate(cells, &options, spec.targets())?;

    let mut plan: Vec<(usize, Config)> = Vec::with_capacity(spec.n);
    for (cell, cs) in counts.iter().enumerate() {
        for (opt, &n) in cs.iter().enumerate() {
            plan.extend(std::iter::repeat_n((cell, options[cell][opt].1), n));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    plan.shuffle(&mut rng);

    let c = spec.num_classes;
    let records: Vec<ClassRecord> = plan
        .iter()
        .enumerate()
        .map(|(i, &(cell, cfg))| {
            let truth = (i % c as usize) as u32;
            let mut classes = [truth; 11];
            for (j, off) in index::sample(&mut rng, c as usize - 1, 10).into_iter().enumerate() {
                classes[j + 1] = (truth + 1 + off as u32) % c;
            }
            let resolve = |slots: Slots| slots.map(|s| classes[s as usize]);
            let p = resolve(primary_slots(cell));
            let s = resolve(cfg.secondary);
            ClassRecord {
                item_id: format!("item{i:06}"),
                truth: Some(truth),
                primary_topk: p.to_vec(),
                secondary_topk: s.to_vec(),
                primary_probs: spec
                    .with_probs
                    .then(|| probs(p, &TEMPLATES[cfg.primary_template], c)),
                secondary_probs: spec
                    .with_probs
                    .then(|| probs(s, &TEMPLATES[cfg.secondary_template], c)),
            }
        })
        .collect();

    let log = ClassLog::new(c, records).map_err(|e| SynthError::Internal(e.to_string()))?;
    verify(&log, spec)?;
    Ok(log)
}

/// Recounts every pinned quantity on the generated log.
fn verify(log: &ClassLog, spec: &ClassLogSpec) -> Result<(), SynthError> {
    let mut got = [0usize; 9];
    let fusion = EnsembleFusion::default();
    for r in log.records() {
        let t = r.truth.expect("generated with truth");
        let f1 = r.primary_topk[0] != t;
        let f5 = !r.primary_topk[..5].contains(&t);
        let d = r.primary_topk[0] != r.secondary_topk[0];
        let bits = [
            f1,
            f5,
            d,
            f1 && d,
            f5 && d,
            r.secondary_topk[0] != t,
            !r.secondary_topk[..5].contains(&t),
        ];
        for (g, b) in got.iter_mut().zip(bits) {
            *g += b as usize;
        }
        if let (Some(p), Some(s)) = (&r.primary_probs, &r.secondary_probs) {
            let rank = rank_of(&fusion.fuse(p, s), t);
            got[7] += (rank >= 1) as usize;
            got[8] += (rank >= 5) as usize;
        }
    }
    let want = [
        Some(spec.fail1),
        Some(spec.fail5),
        Some(spec.disagree),
        Some(spec.tp1),
        Some(spec.tp5),
        spec.secondary_fail1,
        spec.secondary_fail5,
        spec.ensemble_fail1,
        spec.ensemble_fail5,
    ];
    for (i, (w, g)) in want.iter().zip(got).enumerate() {
        if let Some(w) = w {
            if *w != g {
                return Err(SynthError::Internal(format!(
                    "count #{i} is {g}, expected {w}"
                )));
            }
        }
    }
    Ok(())
}
