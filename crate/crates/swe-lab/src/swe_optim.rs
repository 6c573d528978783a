//! The share-weights-then-unshare policy engine.
//!
//! A schedule decides, per training step, how the raw per-layer gradients are
//! transformed before the optimizer applies them. Sharing averages gradients
//! within tie classes; unsharing is the identity. All transforms compute each
//! tie-class value once and clone it to every member, so tied layers stay
//! bit-identical for as long as the schedule keeps them tied.

use crate::core_math::matrix::Matrix;
use crate::core_math::rng::Rng;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gradient-transform policy applied at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweMode {
    /// Share (average within tie classes) while `t < untie_step`, then train freely.
    Swe,
    /// Identity at every step; the plain-GD baseline.
    NoSharing,
    /// Share at every step; never unties.
    AlwaysShared,
    /// Blend `(mean(g) + g_i) / 2` at every step.
    Repara,
    /// All layers receive the symmetrized mean gradient while `t < untie_step`.
    SymmetricStemSwe,
}

/// Constant or per-step learning rate carried by a schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    PerStep(Vec<f64>),
}

/// Full SWE policy: horizon `T`, untie step, sharing shape `A x B`, mode,
/// and learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweSchedule {
    total_steps: usize,
    untie_step: usize,
    unit_size: usize,
    repeat_count: usize,
    mode: SweMode,
    learning_rate: LearningRate,
}

impl SweSchedule {
    /// Builds a schedule after validating `untie_step <= total_steps`,
    /// nonzero sharing shape, and positive finite learning rates covering
    /// every step.
    ///
    /// # Errors
    /// Fails with a message naming the offending field.
    pub fn new(
        mode: SweMode,
        total_steps: usize,
        untie_step: usize,
        unit_size: usize,
        repeat_count: usize,
        learning_rate: LearningRate,
    ) -> Result<Self> {
        if untie_step > total_steps {
            return Err(Error::InvalidArgument(format!(
                "untie_step {untie_step} exceeds total_steps {total_steps}"
            )));
        }
        if unit_size == 0 || repeat_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "sharing shape {unit_size}x{repeat_count} must be nonzero"
            )));
        }
        match &learning_rate {
            LearningRate::Constant(eta) => {
                if !eta.is_finite() || *eta < 0.0 {
                    return Err(Error::InvalidArgument(format!("learning rate {eta} must be finite and >= 0")));
                }
            }
            LearningRate::PerStep(seq) => {
                if seq.len() < total_steps {
                    return Err(Error::InvalidArgument(format!(
                        "per-step learning rate has {} entries for {} steps",
                        seq.len(),
                        total_steps
                    )));
                }
                if let Some(bad) = seq.iter().find(|e| !e.is_finite() || **e < 0.0) {
                    return Err(Error::InvalidArgument(format!("learning rate {bad} must be finite and >= 0")));
                }
            }
        }
        Ok(SweSchedule {
            total_steps,
            untie_step,
            unit_size,
            repeat_count,
            mode,
            learning_rate,
        })
    }

    /// Schedule with the common full-sharing shape `1 x depth` and a constant
    /// learning rate.
    ///
    /// # Errors
    /// Same validation as [`SweSchedule::new`].
    pub fn full_sharing(mode: SweMode, total_steps: usize, untie_step: usize, depth: usize, eta: f64) -> Result<Self> {
        SweSchedule::new(mode, total_steps, untie_step, 1, depth, LearningRate::Constant(eta))
    }

    #[must_use]
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    #[must_use]
    pub fn untie_step(&self) -> usize {
        self.untie_step
    }

    #[must_use]
    pub fn unit_size(&self) -> usize {
        self.unit_size
    }

    #[must_use]
    pub fn repeat_count(&self) -> usize {
        self.repeat_count
    }

    #[must_use]
    pub fn mode(&self) -> SweMode {
        self.mode
    }

    /// Learning rate for 1-based step `t`.
    #[must_use]
    pub fn eta_at(&self, t: usize) -> f64 {
        match &self.learning_rate {
            LearningRate::Constant(eta) => *eta,
            LearningRate::PerStep(seq) => seq[t - 1],
        }
    }

    /// Copy of this schedule with a different learning rate.
    #[must_use]
    pub fn with_learning_rate(&self, learning_rate: LearningRate) -> Self {
        SweSchedule {
            learning_rate,
            ..self.clone()
        }
    }

    /// Copy of this schedule with a different horizon; the untie step is
    /// clamped into range for boundary-mode schedules where it is inert.
    ///
    /// # Errors
    /// Fails when the untie step of a mode that uses it exceeds `total_steps`.
    pub fn with_total_steps(&self, total_steps: usize) -> Result<Self> {
        let mut copy = self.clone();
        copy.total_steps = total_steps;
        if copy.untie_step > total_steps {
            match copy.mode {
                SweMode::NoSharing | SweMode::AlwaysShared | SweMode::Repara => copy.untie_step = total_steps,
                SweMode::Swe | SweMode::SymmetricStemSwe => {
                    return Err(Error::InvalidArgument(format!(
                        "untie_step {} exceeds total_steps {}",
                        copy.untie_step, total_steps
                    )))
                }
            }
        }
        Ok(copy)
    }

    /// Checks that this schedule's sharing shape covers a depth-`l` model.
    ///
    /// # Errors
    /// Fails when `unit_size * repeat_count != l`.
    pub fn validate_depth(&self, l: usize) -> Result<()> {
        if self.unit_size * self.repeat_count != l {
            return Err(Error::InvalidArgument(format!(
                "sharing shape {}x{} covers {} layers, model has {}",
                self.unit_size,
                self.repeat_count,
                self.unit_size * self.repeat_count,
                l
            )));
        }
        Ok(())
    }

    /// Whether layers are tied (receive a common tie-class gradient) at
    /// 1-based step `t`.
    #[must_use]
    pub fn is_tied_at(&self, t: usize) -> bool {
        match self.mode {
            SweMode::Swe | SweMode::SymmetricStemSwe => t < self.untie_step,
            SweMode::NoSharing | SweMode::Repara => false,
            SweMode::AlwaysShared => true,
        }
    }
}

/// Per-layer gradients, one matrix per layer, homogeneous shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    grads: Vec<Matrix>,
}

impl GradientSet {
    /// Wraps per-layer gradients after checking shape homogeneity.
    ///
    /// # Errors
    /// Fails on an empty set or mismatched member shapes.
    pub fn new(grads: Vec<Matrix>) -> Result<Self> {
        let Some(first) = grads.first() else {
            return Err(Error::InvalidArgument("gradient set is empty".into()));
        };
        let (rows, cols) = (first.rows(), first.cols());
        for (i, g) in grads.iter().enumerate() {
            if g.rows() != rows || g.cols() != cols {
                return Err(Error::InvalidArgument(format!(
                    "gradient {} has shape {}x{}, expected {}x{}",
                    i,
                    g.rows(),
                    g.cols(),
                    rows,
                    cols
                )));
            }
        }
        Ok(GradientSet { grads })
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.grads.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    #[must_use]
    pub fn get(&self, i: usize) -> &Matrix {
        &self.grads[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Matrix> {
        self.grads.iter()
    }

    #[must_use]
    pub fn into_vec(self) -> Vec<Matrix> {
        self.grads
    }

    /// Arithmetic mean of all members: fixed left-to-right summation, then a
    /// single division.
    #[must_use]
    pub fn mean(&self) -> Matrix {
        mean_of(&self.grads)
    }
}

fn mean_of(ms: &[Matrix]) -> Matrix {
    let mut acc = ms[0].clone();
    for m in &ms[1..] {
        acc.add_scaled_assign(m, 1.0).expect("homogeneous shapes");
    }
    acc.scaled(1.0 / ms.len() as f64)
}

/// Draws one template per in-unit position and clones it across all `B`
/// units, realizing random-but-equal initialization of tie classes.
///
/// Layer `(u - 1) * A + j` of unit `u` ties with position `j` of every other
/// unit; the `A` positions within a unit are independent draws.
///
/// # Errors
/// Fails when `unit_size * repeat_count != depth`.
pub fn equal_group_init<F>(
    depth: usize,
    unit_size: usize,
    repeat_count: usize,
    mut sample: F,
    rng: &mut Rng,
) -> Result<Vec<Matrix>>
where
    F: FnMut(&mut Rng) -> Matrix,
{
    if unit_size * repeat_count != depth {
        return Err(Error::InvalidArgument(format!(
            "sharing shape {unit_size}x{repeat_count} does not cover depth {depth}"
        )));
    }
    let templates: Vec<Matrix> = (0..unit_size).map(|_| sample(rng)).collect();
    let mut layers = Vec::with_capacity(depth);
    for _unit in 0..repeat_count {
        for template in &templates {
            layers.push(template.clone());
        }
    }
    Ok(layers)
}

/// Replaces each gradient with the mean over its tie class: position `j`
/// of every unit receives the average of position `j` across all `B` units.
/// With `A = 1` this is the global mean `(1/L) * sum(g)`.
///
/// # Errors
/// Fails when the sharing shape does not match the set length.
pub fn shared_mean_transform(g: &GradientSet, unit_size: usize, repeat_count: usize) -> Result<GradientSet> {
    if unit_size * repeat_count != g.len() {
        return Err(Error::InvalidArgument(format!(
            "sharing shape {unit_size}x{repeat_count} does not cover {} gradients",
            g.len()
        )));
    }
    let mut out: Vec<Option<Matrix>> = vec![None; g.len()];
    for position in 0..unit_size {
        let mut acc = g.get(position).clone();
        for unit in 1..repeat_count {
            acc.add_scaled_assign(g.get(unit * unit_size + position), 1.0)?;
        }
        let tied = acc.scaled(1.0 / repeat_count as f64);
        for unit in 0..repeat_count {
            out[unit * unit_size + position] = Some(tied.clone());
        }
    }
    GradientSet::new(out.into_iter().map(|m| m.expect("all positions filled")).collect())
}

/// The reparameterization baseline: every layer receives `(mean(g) + g_i) / 2`.
///
/// # Errors
/// Propagates shape mismatches (impossible for a validated set).
pub fn repara_transform(g: &GradientSet) -> Result<GradientSet> {
    let mean = g.mean();
    let mut out = Vec::with_capacity(g.len());
    for gi in g.iter() {
        out.push(mean.add(gi)?.scaled(0.5));
    }
    GradientSet::new(out)
}

/// Symmetric-stem sharing: every layer receives `(G + G^T) / 2` where `G` is
/// the global mean gradient.
///
/// # Errors
/// Fails when the gradients are not square.
pub fn symmetric_stem_transform(g: &GradientSet) -> Result<GradientSet> {
    let tied = g.mean().symmetrized()?;
    GradientSet::new(vec![tied; g.len()])
}

/// Applies the schedule's transform for 1-based step `t`.
///
/// # Errors
/// Fails when `t` is outside `[1, total_steps]`, the sharing shape does not
/// match the set, or the mode's transform rejects the gradients.
pub fn apply_schedule(g: &GradientSet, schedule: &SweSchedule, t: usize) -> Result<GradientSet> {
    if t < 1 || t > schedule.total_steps() {
        return Err(Error::InvalidArgument(format!(
            "step {t} outside schedule horizon 1..={}",
            schedule.total_steps()
        )));
    }
    schedule.validate_depth(g.len())?;
    match schedule.mode() {
        SweMode::Swe => {
            if t < schedule.untie_step() {
                shared_mean_transform(g, schedule.unit_size(), schedule.repeat_count())
            } else {
                Ok(g.clone())
            }
        }
        SweMode::NoSharing => Ok(g.clone()),
        SweMode::AlwaysShared => shared_mean_transform(g, schedule.unit_size(), schedule.repeat_count()),
        SweMode::Repara => repara_transform(g),
        SweMode::SymmetricStemSwe => {
            if t < schedule.untie_step() {
                symmetric_stem_transform(g)
            } else {
                Ok(g.clone())
            }
        }
    }
}

/// Plain gradient step `w_i <- w_i - eta * g_i`.
///
/// # Errors
/// Fails on a non-finite gradient (reporting the layer), a length mismatch,
/// or mismatched per-layer shapes.
pub fn sgd_step(weights: &mut [Matrix], g: &GradientSet, eta: f64) -> Result<()> {
    if weights.len() != g.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weight layers vs {} gradients",
            weights.len(),
            g.len()
        )));
    }
    for (layer, gi) in g.iter().enumerate() {
        if !gi.is_finite() {
            return Err(Error::NonFinite {
                context: "gradient",
                layer,
            });
        }
        weights[layer].add_scaled_assign(gi, -eta)?;
    }
    Ok(())
}

/// AdamW hyperparameters; defaults follow the usual decoupled-decay setup.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.01,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment state for [`adam_step`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: usize,
}

impl AdamState {
    /// Zero moments shaped like the given weights.
    #[must_use]
    pub fn zeros_like(weights: &[Matrix]) -> Self {
        AdamState {
            m: weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            v: weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            t: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay and bias correction.
///
/// # Errors
/// Fails on non-finite gradients or mismatched shapes.
pub fn adam_step(
    weights: &mut [Matrix],
    g: &GradientSet,
    state: &mut AdamState,
    eta: f64,
    params: &AdamParams,
) -> Result<()> {
    if weights.len() != g.len() || state.m.len() != g.len() {
        return Err(Error::InvalidArgument(format!(
            "adam_step over {} weights, {} gradients, {} moment layers",
            weights.len(),
            g.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - params.beta1.powi(t);
    let bias2 = 1.0 - params.beta2.powi(t);
    for (layer, gi) in g.iter().enumerate() {
        if !gi.is_finite() {
            return Err(Error::NonFinite {
                context: "gradient",
                layer,
            });
        }
        let m = &mut state.m[layer];
        let v = &mut state.v[layer];
        for idx in 0..gi.data().len() {
            let grad = gi.data()[idx];
            m.data_mut()[idx] = params.beta1 * m.data()[idx] + (1.0 - params.beta1) * grad;
            v.data_mut()[idx] = params.beta2 * v.data()[idx] + (1.0 - params.beta2) * grad * grad;
            let m_hat = m.data()[idx] / bias1;
            let v_hat = v.data()[idx] / bias2;
            let w = &mut weights[layer].data_mut()[idx];
            *w -= eta * params.weight_decay * *w + eta * m_hat / (v_hat.sqrt() + params.epsilon);
        }
        if !weights[layer].is_finite() {
            return Err(Error::NonFinite {
                context: "adam update",
                layer,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_math::rng::{gaussian_matrix, Rng};
    use proptest::prelude::*;

    fn scalar_set(values: &[f64]) -> GradientSet {
        GradientSet::new(
            values
                .iter()
                .map(|&v| Matrix::from_vec(1, 1, vec![v]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn scalars(g: &GradientSet) -> Vec<f64> {
        g.iter().map(|m| m.get(0, 0)).collect()
    }

    fn random_set(l: usize, rows: usize, cols: usize, seed: u64) -> GradientSet {
        let mut rng = Rng::new(seed);
        GradientSet::new(
            (0..l)
                .map(|_| gaussian_matrix(rows, cols, 0.0, 1.0, &mut rng).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn swe_schedule(t_total: usize, untie: usize, a: usize, b: usize) -> SweSchedule {
        SweSchedule::new(SweMode::Swe, t_total, untie, a, b, LearningRate::Constant(0.1)).unwrap()
    }

    #[test]
    fn equal_group_init_tie_classes() {
        let sampler = |rng: &mut Rng| gaussian_matrix(2, 2, 0.0, 1.0, rng).unwrap();

        let mut rng = Rng::new(1);
        let full = equal_group_init(4, 1, 4, sampler, &mut rng).unwrap();
        assert!(full.iter().all(|w| *w == full[0]));

        let mut rng = Rng::new(1);
        let none = equal_group_init(4, 4, 1, sampler, &mut rng).unwrap();
        assert_ne!(none[0], none[1]);
        assert_ne!(none[2], none[3]);

        let mut rng = Rng::new(1);
        let grouped = equal_group_init(4, 2, 2, sampler, &mut rng).unwrap();
        assert_eq!(grouped[0], grouped[2]);
        assert_eq!(grouped[1], grouped[3]);
        assert_ne!(grouped[0], grouped[1]);

        assert!(equal_group_init(5, 2, 2, sampler, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn shared_mean_hand_examples() {
        let g = scalar_set(&[1.0, 3.0]);
        assert_eq!(scalars(&shared_mean_transform(&g, 1, 2).unwrap()), vec![2.0, 2.0]);

        let g = scalar_set(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            scalars(&shared_mean_transform(&g, 2, 2).unwrap()),
            vec![2.0, 3.0, 2.0, 3.0]
        );
    }

    #[test]
    fn shared_mean_fixes_equal_gradients() {
        // Dyadic entries make the mean of identical values exact, so the
        // fixed-point property holds bitwise.
        let g = Matrix::from_rows(&[vec![0.5, -1.25], vec![2.0, 0.0]]).unwrap();
        let set = GradientSet::new(vec![g.clone(), g.clone(), g.clone()]).unwrap();
        let out = shared_mean_transform(&set, 1, 3).unwrap();
        for gi in out.iter() {
            assert_eq!(*gi, g);
        }
    }

    #[test]
    fn shared_mean_preserves_global_mean() {
        let g = random_set(6, 2, 3, 9);
        let out = shared_mean_transform(&g, 1, 6).unwrap();
        let before = g.mean();
        let after = out.mean();
        assert!(after.max_abs_diff(&before).unwrap() <= 1e-15 * before.max_abs().max(1.0));
        // Every member IS the mean, bit-exactly.
        for gi in out.iter() {
            assert_eq!(*gi, before);
        }
    }

    #[test]
    fn repara_hand_examples() {
        let g = scalar_set(&[0.0, 4.0]);
        assert_eq!(scalars(&repara_transform(&g).unwrap()), vec![1.0, 3.0]);

        let g = random_set(5, 2, 2, 21);
        let out = repara_transform(&g).unwrap();
        let mean = g.mean();
        for (gi, oi) in g.iter().zip(out.iter()) {
            let expected = mean.add(gi).unwrap().scaled(0.5);
            assert!(oi.max_abs_diff(&expected).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn symmetric_stem_hand_examples() {
        let g = GradientSet::new(vec![Matrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap()]).unwrap();
        let out = symmetric_stem_transform(&g).unwrap();
        assert_eq!(
            *out.get(0),
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
        );

        let g = random_set(3, 3, 3, 33);
        let out = symmetric_stem_transform(&g).unwrap();
        let expected = g.mean().symmetrized().unwrap();
        for oi in out.iter() {
            assert!(oi.max_abs_diff(&expected).unwrap() <= 1e-14);
        }

        let rect = GradientSet::new(vec![Matrix::zeros(2, 3)]).unwrap();
        assert!(symmetric_stem_transform(&rect).is_err());
    }

    #[test]
    fn schedule_dispatch_honors_strict_untie() {
        let g = scalar_set(&[1.0, 3.0]);
        let schedule = swe_schedule(10, 5, 1, 2);

        // At the untie step itself the transform is already the identity.
        assert_eq!(scalars(&apply_schedule(&g, &schedule, 5).unwrap()), vec![1.0, 3.0]);
        assert_eq!(scalars(&apply_schedule(&g, &schedule, 4).unwrap()), vec![2.0, 2.0]);

        let none = SweSchedule::new(SweMode::NoSharing, 10, 0, 1, 2, LearningRate::Constant(0.1)).unwrap();
        assert_eq!(scalars(&apply_schedule(&g, &none, 7).unwrap()), vec![1.0, 3.0]);

        let always = SweSchedule::new(SweMode::AlwaysShared, 10, 10, 1, 2, LearningRate::Constant(0.1)).unwrap();
        assert_eq!(scalars(&apply_schedule(&g, &always, 10).unwrap()), vec![2.0, 2.0]);

        assert!(apply_schedule(&g, &schedule, 0).is_err());
        assert!(apply_schedule(&g, &schedule, 11).is_err());

        let wrong_depth = swe_schedule(10, 5, 1, 3);
        assert!(apply_schedule(&g, &wrong_depth, 1).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(SweSchedule::new(SweMode::Swe, 10, 11, 1, 2, LearningRate::Constant(0.1)).is_err());
        assert!(SweSchedule::new(SweMode::Swe, 10, 5, 0, 2, LearningRate::Constant(0.1)).is_err());
        assert!(SweSchedule::new(SweMode::Swe, 10, 5, 1, 2, LearningRate::Constant(-1.0)).is_err());
        assert!(SweSchedule::new(SweMode::Swe, 10, 5, 1, 2, LearningRate::PerStep(vec![0.1; 9])).is_err());

        let seq = SweSchedule::new(SweMode::Swe, 3, 2, 1, 2, LearningRate::PerStep(vec![0.1, 0.2, 0.3])).unwrap();
        assert_eq!(seq.eta_at(2), 0.2);
    }

    #[test]
    fn sgd_step_basics() {
        let mut w = vec![Matrix::from_vec(1, 1, vec![1.0]).unwrap()];
        let g = scalar_set(&[2.0]);
        sgd_step(&mut w, &g, 0.0).unwrap();
        assert_eq!(w[0].get(0, 0), 1.0);
        sgd_step(&mut w, &g, 0.25).unwrap();
        assert_eq!(w[0].get(0, 0), 0.5);

        let bad = GradientSet::new(vec![Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap()]).unwrap();
        assert!(matches!(
            sgd_step(&mut w, &bad, 0.1),
            Err(Error::NonFinite { layer: 0, .. })
        ));
    }

    #[test]
    fn tie_classes_stay_bit_identical_over_many_steps() {
        // Synthetic closed-loop run: gradients are a deterministic function
        // of the weights, so tied layers keep receiving tied gradients.
        let mut rng = Rng::new(77);
        let mut weights =
            equal_group_init(4, 2, 2, |r| gaussian_matrix(3, 3, 0.0, 1.0, r).unwrap(), &mut rng).unwrap();
        let probe = gaussian_matrix(3, 3, 0.0, 1.0, &mut rng).unwrap();
        let schedule = swe_schedule(200, 150, 2, 2);

        for t in 1..=100 {
            let raw = GradientSet::new(
                weights
                    .iter()
                    .map(|w| w.matmul(&probe).unwrap().add(w).unwrap().scaled(0.01))
                    .collect(),
            )
            .unwrap();
            let transformed = apply_schedule(&raw, &schedule, t).unwrap();
            sgd_step(&mut weights, &transformed, 0.05).unwrap();
            assert_eq!(weights[0], weights[2], "tie class broke at step {t}");
            assert_eq!(weights[1], weights[3], "tie class broke at step {t}");
        }
    }

    #[test]
    fn equal_gradients_make_swe_equal_plain_gd() {
        // Dyadic values: exact arithmetic, so the equivalence is bitwise.
        let g = Matrix::from_rows(&[vec![0.25, -0.5], vec![1.5, 2.0]]).unwrap();
        let set = GradientSet::new(vec![g.clone(), g.clone(), g.clone()]).unwrap();
        let schedule = SweSchedule::new(SweMode::Swe, 10, 9, 1, 3, LearningRate::Constant(0.125)).unwrap();

        let mut shared = vec![Matrix::identity(2); 3];
        let mut plain = shared.clone();
        let transformed = apply_schedule(&set, &schedule, 1).unwrap();
        sgd_step(&mut shared, &transformed, 0.125).unwrap();
        sgd_step(&mut plain, &set, 0.125).unwrap();
        assert_eq!(shared, plain);

        // Random values: equivalence up to rounding in the mean.
        let set = random_set(3, 2, 2, 5);
        let equalized = GradientSet::new(vec![set.get(0).clone(); 3]).unwrap();
        let out = apply_schedule(&equalized, &schedule, 1).unwrap();
        for oi in out.iter() {
            assert!(oi.max_abs_diff(set.get(0)).unwrap() <= 1e-15 * set.get(0).max_abs().max(1.0));
        }
    }

    #[test]
    fn adam_decay_and_first_step() {
        let params = AdamParams::default();

        // Zero gradient: pure decoupled decay.
        let mut w = vec![Matrix::from_vec(1, 1, vec![2.0]).unwrap()];
        let mut state = AdamState::zeros_like(&w);
        let zero = scalar_set(&[0.0]);
        adam_step(&mut w, &zero, &mut state, 0.1, &params).unwrap();
        assert!((w[0].get(0, 0) - 2.0 * (1.0 - 0.1 * 0.01)).abs() <= 1e-15);

        // First step from zero moments: magnitude ~ eta, direction -sign(g).
        let mut w = vec![Matrix::from_vec(1, 1, vec![0.0]).unwrap()];
        let mut state = AdamState::zeros_like(&w);
        let g = scalar_set(&[3.0]);
        adam_step(&mut w, &g, &mut state, 0.1, &params).unwrap();
        assert!((w[0].get(0, 0) + 0.1).abs() <= 1e-6, "got {}", w[0].get(0, 0));
    }

    #[test]
    fn adam_keeps_tied_layers_tied() {
        let g0 = Matrix::from_rows(&[vec![0.3, -0.7], vec![0.1, 0.9]]).unwrap();
        let set = GradientSet::new(vec![g0.clone(), g0.scaled(2.0)]).unwrap();
        let schedule = SweSchedule::new(SweMode::AlwaysShared, 50, 50, 1, 2, LearningRate::Constant(0.05)).unwrap();

        let mut w = vec![Matrix::identity(2); 2];
        let mut state = AdamState::zeros_like(&w);
        for t in 1..=50 {
            let transformed = apply_schedule(&set, &schedule, t).unwrap();
            adam_step(&mut w, &transformed, &mut state, 0.05, &AdamParams::default()).unwrap();
            assert_eq!(w[0], w[1], "diverged at step {t}");
        }
    }

    proptest! {
        #[test]
        fn transforms_are_linear(seed in 0u64..200, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let g = random_set(4, 2, 2, seed);
            let h = random_set(4, 2, 2, seed ^ 0xABCD);
            let combo = GradientSet::new(
                (0..4).map(|i| g.get(i).scaled(alpha).add(&h.get(i).scaled(beta)).unwrap()).collect(),
            ).unwrap();

            type Tf = fn(&GradientSet) -> crate::error::Result<GradientSet>;
            let mean_tf: Tf = |s| shared_mean_transform(s, 2, 2);
            for transform in [mean_tf, repara_transform as Tf, symmetric_stem_transform as Tf] {
                let lhs = transform(&combo).unwrap();
                let tg = transform(&g).unwrap();
                let th = transform(&h).unwrap();
                for i in 0..4 {
                    let rhs = tg.get(i).scaled(alpha).add(&th.get(i).scaled(beta)).unwrap();
                    let scale = rhs.max_abs().max(1.0);
                    prop_assert!(lhs.get(i).max_abs_diff(&rhs).unwrap() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn mean_preserved_under_full_sharing(seed in 0u64..200, l in 1usize..7) {
            let g = random_set(l, 2, 2, seed);
            let out = shared_mean_transform(&g, 1, l).unwrap();
            let before = g.mean();
            let after = out.mean();
            let scale = before.max_abs().max(1.0);
            prop_assert!(after.max_abs_diff(&before).unwrap() <= 1e-15 * scale);
        }
    }
}
