use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::PlanarImage;

use super::{minkowski_estimate, EstimatorSpec, IlluminantEstimate, MinkowskiNorm};

/// Anything that can estimate a global illuminant from a camera-raw image.
pub trait IlluminantEstimator: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, img: &PlanarImage) -> Result<IlluminantEstimate>;

    /// Parameters recorded in reports.
    fn describe(&self) -> serde_json::Value;
}

pub struct MinkowskiEstimator {
    spec: EstimatorSpec,
}

impl MinkowskiEstimator {
    pub fn new(spec: EstimatorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }
}

impl IlluminantEstimator for MinkowskiEstimator {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn estimate(&self, img: &PlanarImage) -> Result<IlluminantEstimate> {
        minkowski_estimate(img, &self.spec)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.spec).expect("spec serializes")
    }
}

/// Command-line style overrides applied on top of a named preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorOverrides {
    pub norm: Option<MinkowskiNorm>,
    pub sigma: Option<f64>,
    pub order: Option<u8>,
    pub saturation_level: Option<f64>,
}

impl EstimatorOverrides {
    pub fn apply(&self, spec: &mut EstimatorSpec) {
        if let Some(n) = self.norm {
            spec.norm = n;
        }
        if let Some(s) = self.sigma {
            spec.sigma = s;
        }
        if let Some(o) = self.order {
            spec.order = o;
        }
        if self.saturation_level.is_some() {
            spec.saturation_level = self.saturation_level;
        }
    }
}

type Factory = Arc<dyn Fn(&EstimatorOverrides) -> Result<Box<dyn IlluminantEstimator>> + Send + Sync>;

/// Estimators addressable by name.
#[derive(Clone)]
pub struct EstimatorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding the six Minkowski-family presets.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        for name in EstimatorSpec::PRESET_NAMES {
            reg.register(name, move |ov| {
                let mut spec = EstimatorSpec::preset(name)?;
                ov.apply(&mut spec);
                Ok(Box::new(MinkowskiEstimator::new(spec)?) as Box<dyn IlluminantEstimator>)
            });
        }
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&EstimatorOverrides) -> Result<Box<dyn IlluminantEstimator>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Arc::new(factory));
    }

    pub fn create(&self, name: &str, overrides: &EstimatorOverrides) -> Result<Box<dyn IlluminantEstimator>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown estimator {name:?} (available: {})",
                self.names().join(", ")
            ))
        })?;
        factory(overrides)
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;

    #[test]
    fn builtins_resolve_by_name() {
        let reg = EstimatorRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["ge1", "ge2", "ggw", "gw", "sog", "wp"]);
        let est = reg.create("ggw", &EstimatorOverrides::default()).unwrap();
        assert_eq!(est.name(), "ggw");
        assert!(reg.create("fc4", &EstimatorOverrides::default()).is_err());
    }

    #[test]
    fn overrides_reach_the_spec() {
        let reg = EstimatorRegistry::with_builtins();
        let ov = EstimatorOverrides {
            norm: Some(MinkowskiNorm::P(2.0)),
            sigma: Some(2.0),
            order: Some(1),
            ..Default::default()
        };
        let est = reg.create("gw", &ov).unwrap();
        let d = est.describe();
        assert_eq!(d["order"], 1);
        assert_eq!(d["sigma"], 2.0);
        // invalid combinations are rejected at construction
        let bad = EstimatorOverrides {
            order: Some(2),
            ..Default::default()
        };
        assert!(reg.create("gw", &bad).is_err());
    }

    #[test]
    fn custom_estimators_can_be_registered() {
        struct Fixed;
        impl IlluminantEstimator for Fixed {
            fn name(&self) -> &str {
                "fixed"
            }
            fn estimate(&self, _: &PlanarImage) -> Result<IlluminantEstimate> {
                IlluminantEstimate::from_raw(vec![1.0, 1.0, 1.0])
            }
            fn describe(&self) -> serde_json::Value {
                serde_json::json!({"name": "fixed"})
            }
        }
        let mut reg = EstimatorRegistry::empty();
        reg.register("fixed", |_| Ok(Box::new(Fixed) as Box<dyn IlluminantEstimator>));
        let img = PlanarImage::constant(1, 1, &[1.0, 2.0, 3.0], ColorSpace::CameraRaw);
        let e = reg
            .create("fixed", &Default::default())
            .unwrap()
            .estimate(&img)
            .unwrap();
        assert!((e.rgb[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
