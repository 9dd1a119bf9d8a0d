//! Model structure, parameter containers and the mapping between
//! parameters and the unconstrained vector seen by the optimizer.
//!
//! Identification defaults (recorded in every fit's `notes`):
//!
//! * the diffusion Cholesky factor has a unit diagonal, fixing each latent's
//!   scale; off-diagonals are fixed at 0 unless freed,
//! * the continuous intercept is fixed at 0 (it is confounded with the
//!   manifest intercept under a stationary start),
//! * the initial latent distribution is the stationary one,
//! * behavior predictors act as impulses `M·χ_t` at observation times.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use ctpanel_core::CHANNELS;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Real;

pub const DEFAULT_LATENTS: [&str; 4] = ["ind_KIA", "inter_KIA", "ind_intensify", "inter_intensify"];

impl Serialize for Mat<f64> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(serde::de::Error::custom("ragged matrix rows"));
            }
        }
        Ok(Mat::from_rows(&rows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Everything shared across groups except (by default) the loadings.
    #[default]
    Constrained,
    /// A complete, separate parameter set per group.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialForm {
    #[default]
    Stationary,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative log-likelihood change falls below this.
    pub rel_tol: f64,
    pub std_errors: bool,
    /// Sign-normalize and order latents after fitting.
    pub canonicalize: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 1,
            max_iter: 1000,
            rel_tol: 1e-7,
            std_errors: true,
            canonicalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtModelSpec {
    pub latents: Vec<String>,
    pub manifests: Vec<String>,
    /// Panel channel names used as time-dependent predictors.
    pub predictors: Vec<String>,
    pub drift: DriftForm,
    pub grouping: Grouping,
    /// Only meaningful in constrained mode; free mode is always per group.
    pub loadings_per_group: bool,
    pub free_cint: bool,
    pub free_diffusion_offdiag: bool,
    pub initial: InitialForm,
    pub optimizer: OptimizerConfig,
}

impl Default for CtModelSpec {
    fn default() -> Self {
        Self {
            latents: DEFAULT_LATENTS.iter().map(|s| s.to_string()).collect(),
            manifests: vec!["curiosity".into()],
            predictors: CHANNELS.iter().map(|c| c.name().to_string()).collect(),
            drift: DriftForm::Diagonal,
            grouping: Grouping::Constrained,
            loadings_per_group: true,
            free_cint: false,
            free_diffusion_offdiag: false,
            initial: InitialForm::Stationary,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl CtModelSpec {
    pub fn n_latent(&self) -> usize {
        self.latents.len()
    }

    pub fn n_manifest(&self) -> usize {
        self.manifests.len()
    }

    pub fn n_predictor(&self) -> usize {
        self.predictors.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.latents.is_empty() {
            return fail("latents: at least one latent required");
        }
        if self.manifests.is_empty() {
            return fail("manifests: at least one manifest required");
        }
        if self.predictors.is_empty() {
            return fail("predictors: at least one predictor channel required");
        }
        for names in [&self.latents, &self.manifests, &self.predictors] {
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return fail("duplicate name in latents/manifests/predictors");
            }
        }
        if self.optimizer.starts == 0 {
            return fail("optimizer.starts: must be at least 1");
        }
        if !(self.optimizer.rel_tol > 0.0) {
            return fail("optimizer.rel_tol: must be positive");
        }
        Ok(())
    }

    /// Identification and input-form choices baked into this model.
    pub fn notes(&self) -> Vec<String> {
        let mut notes = vec![
            "diffusion Cholesky diagonal fixed to 1 (latent scale)".to_string(),
            "predictors enter as impulses M*x at observation times".to_string(),
            "missing predictor values enter as 0".to_string(),
        ];
        if !self.free_diffusion_offdiag {
            notes.push("diffusion off-diagonals fixed to 0".into());
        }
        if !self.free_cint {
            notes.push("continuous intercept fixed to 0".into());
        }
        notes.push(match self.initial {
            InitialForm::Stationary => "initial latent distribution = stationary distribution".into(),
            InitialForm::Free => "initial latent mean and covariance free".into(),
        });
        if self.grouping == Grouping::Constrained {
            notes.push("manifest intercept and error variance shared across groups".into());
        }
        notes
    }
}

/// Complete parameter set of one group. Generic so the same container feeds
/// value and gradient evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams<S> {
    pub drift: Mat<S>,
    pub cint: Option<Vec<S>>,
    /// Lower-triangular `G`; diffusion covariance is `G·Gᵀ`.
    pub diffusion_chol: Mat<S>,
    /// `n_latent × n_predictor` impulse effects.
    pub effects: Mat<S>,
    /// `n_manifest × n_latent`.
    pub loadings: Mat<S>,
    pub manifest_intercept: Vec<S>,
    /// Diagonal of the manifest error covariance.
    pub error_var: Vec<S>,
    pub init_mean: Option<Vec<S>>,
    /// Lower Cholesky factor of the initial covariance.
    pub init_chol: Option<Mat<S>>,
}

impl<S: Real> GroupParams<S> {
    pub fn n_latent(&self) -> usize {
        self.drift.nrows()
    }

    pub fn diffusion(&self) -> Mat<S> {
        self.diffusion_chol.matmul_t(&self.diffusion_chol)
    }
}

impl GroupParams<f64> {
    pub fn lift<S: Real>(&self) -> GroupParams<S> {
        GroupParams {
            drift: self.drift.lift(),
            cint: self.cint.as_ref().map(|v| v.iter().map(|&x| S::cst(x)).collect()),
            diffusion_chol: self.diffusion_chol.lift(),
            effects: self.effects.lift(),
            loadings: self.loadings.lift(),
            manifest_intercept: self.manifest_intercept.iter().map(|&x| S::cst(x)).collect(),
            error_var: self.error_var.iter().map(|&x| S::cst(x)).collect(),
            init_mean: self.init_mean.as_ref().map(|v| v.iter().map(|&x| S::cst(x)).collect()),
            init_chol: self.init_chol.as_ref().map(|m| m.lift()),
        }
    }

    /// All-zero structure with unit diffusion for the given sizes.
    pub fn template(n: usize, m: usize, p: usize) -> Self {
        GroupParams {
            drift: Mat::identity(n).scale_f64(-1.0),
            cint: None,
            diffusion_chol: Mat::identity(n),
            effects: Mat::zeros(n, p),
            loadings: Mat::zeros(m, n),
            manifest_intercept: vec![0.0; m],
            error_var: vec![1.0; m],
            init_mean: None,
            init_chol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.drift.nrows();
        let m = self.loadings.nrows();
        let shape_err = |what: &str| Err(Error::Config(format!("{what} has the wrong shape")));
        if !self.drift.is_square() {
            return shape_err("drift");
        }
        if self.diffusion_chol.nrows() != n || self.diffusion_chol.ncols() != n {
            return shape_err("diffusion_chol");
        }
        if self.effects.nrows() != n {
            return shape_err("predictor_effects");
        }
        if self.loadings.ncols() != n {
            return shape_err("loadings");
        }
        if self.manifest_intercept.len() != m || self.error_var.len() != m {
            return shape_err("manifest intercept / error variance");
        }
        if self.cint.as_ref().is_some_and(|c| c.len() != n) {
            return shape_err("cint");
        }
        if self.init_mean.as_ref().is_some_and(|c| c.len() != n) {
            return shape_err("init_mean");
        }
        if self
            .init_chol
            .as_ref()
            .is_some_and(|c| c.nrows() != n || c.ncols() != n)
        {
            return shape_err("init_chol");
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.diffusion_chol[(i, j)] != 0.0 {
                    return Err(Error::Config("diffusion_chol must be lower-triangular".into()));
                }
            }
        }
        if self.error_var.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Config("manifest error variances must be >= 0".into()));
        }
        crate::dynamics::check_stable(&self.drift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupParamsRecord {
    pub group_id: String,
    pub drift: Mat<f64>,
    pub cint: Option<Vec<f64>>,
    pub diffusion_chol: Mat<f64>,
    pub predictor_effects: Mat<f64>,
    pub loadings: Mat<f64>,
    pub manifest_intercept: Vec<f64>,
    pub manifest_error_var: Vec<f64>,
    pub init_mean: Option<Vec<f64>>,
    pub init_chol: Option<Mat<f64>>,
}

/// Parameters of a fitted or generating model, one entry per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CtParamsRecord", into = "CtParamsRecord")]
pub struct CtParams {
    pub latents: Vec<String>,
    pub manifests: Vec<String>,
    pub predictors: Vec<String>,
    pub groups: Vec<(String, GroupParams<f64>)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CtParamsRecord {
    latents: Vec<String>,
    manifests: Vec<String>,
    predictors: Vec<String>,
    groups: Vec<GroupParamsRecord>,
}

impl From<CtParams> for CtParamsRecord {
    fn from(p: CtParams) -> Self {
        CtParamsRecord {
            latents: p.latents,
            manifests: p.manifests,
            predictors: p.predictors,
            groups: p
                .groups
                .into_iter()
                .map(|(group_id, g)| GroupParamsRecord {
                    group_id,
                    drift: g.drift,
                    cint: g.cint,
                    diffusion_chol: g.diffusion_chol,
                    predictor_effects: g.effects,
                    loadings: g.loadings,
                    manifest_intercept: g.manifest_intercept,
                    manifest_error_var: g.error_var,
                    init_mean: g.init_mean,
                    init_chol: g.init_chol,
                })
                .collect(),
        }
    }
}

impl TryFrom<CtParamsRecord> for CtParams {
    type Error = Error;

    fn try_from(r: CtParamsRecord) -> Result<Self> {
        let params = CtParams {
            latents: r.latents,
            manifests: r.manifests,
            predictors: r.predictors,
            groups: r
                .groups
                .into_iter()
                .map(|g| {
                    (
                        g.group_id,
                        GroupParams {
                            drift: g.drift,
                            cint: g.cint,
                            diffusion_chol: g.diffusion_chol,
                            effects: g.predictor_effects,
                            loadings: g.loadings,
                            manifest_intercept: g.manifest_intercept,
                            error_var: g.manifest_error_var,
                            init_mean: g.init_mean,
                            init_chol: g.init_chol,
                        },
                    )
                })
                .collect(),
        };
        params.validate()?;
        Ok(params)
    }
}

impl CtParams {
    pub fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.latents.len(), self.manifests.len(), self.predictors.len());
        if self.groups.is_empty() {
            return Err(Error::Config("parameters for at least one group required".into()));
        }
        for (id, g) in &self.groups {
            g.validate().map_err(|e| Error::Config(format!("group `{id}`: {e}")))?;
            if g.drift.nrows() != n || g.loadings.nrows() != m || g.effects.ncols() != p {
                return Err(Error::Config(format!(
                    "group `{id}`: parameter shapes disagree with {n} latents, {m} manifests, {p} predictors"
                )));
            }
        }
        Ok(())
    }

    pub fn group(&self, id: &str) -> Option<&GroupParams<f64>> {
        self.groups.iter().find(|(g, _)| g == id).map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Drift(usize, usize),
    Cint(usize),
    DiffusionChol(usize, usize),
    Effect(usize, usize),
    Loading(usize, usize),
    ManifestIntercept(usize),
    ErrorVar(usize),
    InitMean(usize),
    InitChol(usize, usize),
}

/// Map from the unconstrained optimizer coordinate to the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// `−exp(θ)`: stable drift diagonal.
    NegExp,
    /// `exp(θ)`: variances and Cholesky diagonals.
    Exp,
}

impl Transform {
    pub fn apply<S: Real>(self, theta: S) -> S {
        match self {
            Transform::Identity => theta,
            Transform::NegExp => -theta.exp(),
            Transform::Exp => theta.exp(),
        }
    }

    pub fn inverse(self, value: f64) -> f64 {
        match self {
            Transform::Identity => value,
            Transform::NegExp => (-value).max(f64::MIN_POSITIVE).ln(),
            Transform::Exp => value.max(f64::MIN_POSITIVE).ln(),
        }
    }

    /// d(value)/d(θ) at the given value.
    pub fn derivative_at(self, value: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::NegExp | Transform::Exp => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub target: Target,
    pub transform: Transform,
    /// `None` when shared by every group of the layout.
    pub group: Option<usize>,
}

/// Ordered free parameters of a model over `n_groups` groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub slots: Vec<Slot>,
    pub group_ids: Vec<String>,
    pub diagonal_drift: bool,
    template: GroupParams<f64>,
}

impl ParamLayout {
    /// Layout for one joint likelihood over `group_ids`. In free mode the
    /// caller builds one single-group layout per group.
    pub fn new(spec: &CtModelSpec, group_ids: &[String]) -> Result<Self> {
        spec.validate()?;
        if group_ids.is_empty() {
            return Err(Error::Config("at least one group required".into()));
        }
        let (n, m, p) = (spec.n_latent(), spec.n_manifest(), spec.n_predictor());
        let lat = &spec.latents;
        let man = &spec.manifests;
        let mut slots = Vec::new();
        let mut push = |name: String, target, transform, group| {
            slots.push(Slot {
                name,
                target,
                transform,
                group,
            })
        };

        for i in 0..n {
            for j in 0..n {
                match spec.drift {
                    DriftForm::Diagonal if i != j => continue,
                    _ => {}
                }
                let transform = if i == j { Transform::NegExp } else { Transform::Identity };
                push(
                    format!("drift[{},{}]", lat[i], lat[j]),
                    Target::Drift(i, j),
                    transform,
                    None,
                );
            }
        }
        if spec.free_cint {
            for i in 0..n {
                push(format!("cint[{}]", lat[i]), Target::Cint(i), Transform::Identity, None);
            }
        }
        if spec.free_diffusion_offdiag {
            for i in 0..n {
                for j in 0..i {
                    push(
                        format!("diffusion_chol[{},{}]", lat[i], lat[j]),
                        Target::DiffusionChol(i, j),
                        Transform::Identity,
                        None,
                    );
                }
            }
        }
        for i in 0..n {
            for c in 0..p {
                push(
                    format!("effect[{}<-{}]", lat[i], spec.predictors[c]),
                    Target::Effect(i, c),
                    Transform::Identity,
                    None,
                );
            }
        }
        let per_group_loadings = spec.loadings_per_group && group_ids.len() > 1;
        let loading_groups: Vec<Option<usize>> = if per_group_loadings {
            (0..group_ids.len()).map(Some).collect()
        } else {
            vec![None]
        };
        for g in loading_groups {
            for r in 0..m {
                for j in 0..n {
                    let prefix = match g {
                        Some(g) => format!("loading[{}]", group_ids[g]),
                        None => "loading".to_string(),
                    };
                    push(
                        format!("{prefix}[{}<-{}]", man[r], lat[j]),
                        Target::Loading(r, j),
                        Transform::Identity,
                        g,
                    );
                }
            }
        }
        for r in 0..m {
            push(
                format!("manifest_intercept[{}]", man[r]),
                Target::ManifestIntercept(r),
                Transform::Identity,
                None,
            );
        }
        for r in 0..m {
            push(
                format!("error_var[{}]", man[r]),
                Target::ErrorVar(r),
                Transform::Exp,
                None,
            );
        }
        if spec.initial == InitialForm::Free {
            for i in 0..n {
                push(
                    format!("init_mean[{}]", lat[i]),
                    Target::InitMean(i),
                    Transform::Identity,
                    None,
                );
            }
            for i in 0..n {
                for j in 0..=i {
                    let t = if i == j { Transform::Exp } else { Transform::Identity };
                    push(
                        format!("init_chol[{},{}]", lat[i], lat[j]),
                        Target::InitChol(i, j),
                        t,
                        None,
                    );
                }
            }
        }

        let mut template = GroupParams::template(n, m, p);
        if spec.free_cint {
            template.cint = Some(vec![0.0; n]);
        }
        if spec.initial == InitialForm::Free {
            template.init_mean = Some(vec![0.0; n]);
            template.init_chol = Some(Mat::identity(n));
        }
        Ok(Self {
            slots,
            group_ids: group_ids.to_vec(),
            diagonal_drift: spec.drift == DriftForm::Diagonal,
            template,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.group_ids.len()
    }

    /// Parameters of group `g` from the unconstrained vector `theta`.
    pub fn unpack<S: Real>(&self, theta: &[S], g: usize) -> GroupParams<S> {
        assert_eq!(theta.len(), self.slots.len());
        let mut p = self.template.lift::<S>();
        for (slot, &t) in self.slots.iter().zip(theta) {
            if slot.group.is_some_and(|sg| sg != g) {
                continue;
            }
            let v = slot.transform.apply(t);
            match slot.target {
                Target::Drift(i, j) => p.drift[(i, j)] = v,
                Target::Cint(i) => p.cint.as_mut().expect("cint slot")[i] = v,
                Target::DiffusionChol(i, j) => p.diffusion_chol[(i, j)] = v,
                Target::Effect(i, c) => p.effects[(i, c)] = v,
                Target::Loading(r, j) => p.loadings[(r, j)] = v,
                Target::ManifestIntercept(r) => p.manifest_intercept[r] = v,
                Target::ErrorVar(r) => p.error_var[r] = v,
                Target::InitMean(i) => p.init_mean.as_mut().expect("init_mean slot")[i] = v,
                Target::InitChol(i, j) => p.init_chol.as_mut().expect("init_chol slot")[(i, j)] = v,
            }
        }
        p
    }

    /// Natural-scale value of every slot, read from the owning group.
    pub fn natural_values(&self, groups: &[GroupParams<f64>]) -> Vec<f64> {
        self.slots
            .iter()
            .map(|slot| {
                let p = &groups[slot.group.unwrap_or(0)];
                match slot.target {
                    Target::Drift(i, j) => p.drift[(i, j)],
                    Target::Cint(i) => p.cint.as_ref().map_or(0.0, |c| c[i]),
                    Target::DiffusionChol(i, j) => p.diffusion_chol[(i, j)],
                    Target::Effect(i, c) => p.effects[(i, c)],
                    Target::Loading(r, j) => p.loadings[(r, j)],
                    Target::ManifestIntercept(r) => p.manifest_intercept[r],
                    Target::ErrorVar(r) => p.error_var[r],
                    Target::InitMean(i) => p.init_mean.as_ref().map_or(0.0, |c| c[i]),
                    Target::InitChol(i, j) => p.init_chol.as_ref().map_or(0.0, |c| c[(i, j)]),
                }
            })
            .collect()
    }

    /// Unconstrained vector reproducing `groups` (one entry per layout group).
    pub fn encode(&self, groups: &[GroupParams<f64>]) -> Vec<f64> {
        self.natural_values(groups)
            .into_iter()
            .zip(&self.slots)
            .map(|(v, s)| s.transform.inverse(v))
            .collect()
    }

    pub fn unpack_all(&self, theta: &[f64]) -> Vec<GroupParams<f64>> {
        (0..self.n_groups()).map(|g| self.unpack(theta, g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CtModelSpec {
        CtModelSpec {
            latents: vec!["a".into(), "b".into()],
            predictors: vec!["joy".into(), "argument".into(), "flow".into()],
            ..Default::default()
        }
    }

    fn groups(n: usize) -> Vec<String> {
        (0..n).map(|g| format!("g{g}")).collect()
    }

    #[test]
    fn constrained_parameter_count() {
        // 2 drift + 6 effects + 2×3 loadings + 1 intercept + 1 error variance
        let layout = ParamLayout::new(&small_spec(), &groups(3)).unwrap();
        assert_eq!(layout.len(), 2 + 6 + 6 + 1 + 1);
        let single = ParamLayout::new(&small_spec(), &groups(1)).unwrap();
        assert_eq!(single.len(), 2 + 6 + 2 + 1 + 1);
    }

    #[test]
    fn full_drift_and_extras_count() {
        let spec = CtModelSpec {
            drift: DriftForm::Full,
            free_cint: true,
            free_diffusion_offdiag: true,
            initial: InitialForm::Free,
            ..small_spec()
        };
        let layout = ParamLayout::new(&spec, &groups(1)).unwrap();
        assert_eq!(layout.len(), 4 + 2 + 1 + 6 + 2 + 1 + 1 + 2 + 3);
    }

    #[test]
    fn encode_unpack_round_trip() {
        let spec = CtModelSpec {
            drift: DriftForm::Full,
            free_cint: true,
            free_diffusion_offdiag: true,
            initial: InitialForm::Free,
            ..small_spec()
        };
        let layout = ParamLayout::new(&spec, &groups(2)).unwrap();
        let theta: Vec<f64> = (0..layout.len()).map(|i| 0.1 * i as f64 - 0.7).collect();
        let params = layout.unpack_all(&theta);
        let back = layout.encode(&params);
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        // shared slots are shared, loadings are not
        assert_eq!(params[0].drift, params[1].drift);
        assert_ne!(params[0].loadings, params[1].loadings);
        assert!(params[0].drift[(0, 0)] < 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = small_spec();
        spec.predictors.clear();
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.latents = vec!["a".into(), "a".into()];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let layout = ParamLayout::new(&small_spec(), &groups(2)).unwrap();
        let theta: Vec<f64> = (0..layout.len()).map(|i| 0.05 * i as f64 - 0.3).collect();
        let params = CtParams {
            latents: small_spec().latents,
            manifests: small_spec().manifests,
            predictors: small_spec().predictors,
            groups: groups(2).into_iter().zip(layout.unpack_all(&theta)).collect(),
        };
        let json = serde_json::to_string(&params).unwrap();
        let back: CtParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, params);
    }
}
