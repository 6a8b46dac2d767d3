use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::dataset::Triplet;
use crate::error::{Error, Result};
use crate::illum_est::{EstimatorOverrides, EstimatorRegistry, IlluminantEstimate, IlluminantEstimator};
use crate::image::PlanarImage;
use crate::kan::{self, KanParams};
use crate::pipeline::{correct_with_estimate, traditional_correct, CameraProfile};

/// A color-correction method: camera data of one triplet in, XYZ out.
pub trait Corrector: Send + Sync {
    fn name(&self) -> String;
    fn correct(&self, triplet: &Triplet) -> Result<PlanarImage>;
    /// Extra identity for report fingerprints (e.g. a checkpoint hash).
    fn fingerprint(&self) -> String {
        self.name()
    }
}

/// Traditional pipeline with an estimator from the registry.
pub struct TraditionalCorrector {
    pub estimator: Box<dyn IlluminantEstimator>,
    pub profile: CameraProfile,
}

impl Corrector for TraditionalCorrector {
    fn name(&self) -> String {
        format!("traditional:{}", self.estimator.name())
    }

    fn correct(&self, t: &Triplet) -> Result<PlanarImage> {
        Ok(traditional_correct(&t.rgb, &self.profile, self.estimator.as_ref())?.0)
    }

    fn fingerprint(&self) -> String {
        format!("traditional:{}", self.estimator.describe())
    }
}

/// Traditional pipeline fed with the true flat-field illuminant color.
pub struct OracleCorrector {
    pub profile: CameraProfile,
}

impl Corrector for OracleCorrector {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn correct(&self, t: &Triplet) -> Result<PlanarImage> {
        let est = IlluminantEstimate::from_raw(t.meta.gt_illuminant_rgb.to_vec())?;
        Ok(correct_with_estimate(&t.rgb, &self.profile, est)?.0)
    }
}

pub struct KanCorrector {
    pub label: String,
    pub params: KanParams,
}

impl Corrector for KanCorrector {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn correct(&self, t: &Triplet) -> Result<PlanarImage> {
        kan::predict_image(&self.params, &t.rgb, &t.ms)
    }

    fn fingerprint(&self) -> String {
        let bytes = kan::encode_checkpoint(&self.params, "").expect("checkpoint encodes");
        format!("{}:{}", self.label, hex::encode(Sha256::digest(bytes)))
    }
}

/// Returns the ground truth itself; a sanity reference with zero error.
pub struct GroundTruthCorrector;

impl Corrector for GroundTruthCorrector {
    fn name(&self) -> String {
        "gt".into()
    }

    fn correct(&self, t: &Triplet) -> Result<PlanarImage> {
        Ok(t.gt.clone())
    }
}

/// Parsed method selector: `traditional:<estimator>`, `oracle`,
/// `kan:<checkpoint path>` or `gt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpec {
    pub kind: String,
    pub arg: Option<String>,
}

impl MethodSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a.to_owned())),
            None => (s, None),
        };
        if kind.is_empty() {
            return Err(Error::Config(format!("empty method name in {s:?}")));
        }
        Ok(Self {
            kind: kind.to_owned(),
            arg,
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Some(a) => write!(f, "{}:{a}", self.kind),
            None => f.write_str(&self.kind),
        }
    }
}

/// What factories may draw on.
pub struct MethodContext<'a> {
    pub profile: &'a CameraProfile,
    pub estimators: &'a EstimatorRegistry,
    pub overrides: EstimatorOverrides,
}

type Factory = dyn Fn(Option<&str>, &MethodContext<'_>) -> Result<Box<dyn Corrector>> + Send + Sync;

/// Correction methods by name.
#[derive(Clone)]
pub struct MethodRegistry {
    factories: BTreeMap<String, Arc<Factory>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("traditional", |arg, ctx| {
            let est = ctx.estimators.create(arg.unwrap_or("gw"), &ctx.overrides)?;
            Ok(Box::new(TraditionalCorrector {
                estimator: est,
                profile: ctx.profile.clone(),
            }))
        });
        r.register("oracle", |_, ctx| {
            Ok(Box::new(OracleCorrector {
                profile: ctx.profile.clone(),
            }))
        });
        r.register("kan", |arg, _| {
            let path = PathBuf::from(arg.ok_or_else(|| Error::Config("kan method needs a checkpoint path".into()))?);
            let (params, _) = kan::load_checkpoint(&path)?;
            Ok(Box::new(KanCorrector {
                label: "kan".into(),
                params,
            }))
        });
        r.register("gt", |_, _| Ok(Box::new(GroundTruthCorrector)));
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(Option<&str>, &MethodContext<'_>) -> Result<Box<dyn Corrector>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Arc::new(factory));
    }

    pub fn create(&self, spec: &MethodSpec, ctx: &MethodContext<'_>) -> Result<Box<dyn Corrector>> {
        let f = self
            .factories
            .get(&spec.kind)
            .ok_or_else(|| Error::Config(format!("unknown method {:?}; known: {:?}", spec.kind, self.names())))?;
        f(spec.arg.as_deref(), ctx)
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
