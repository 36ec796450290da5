use std::path::Path;

use ipkp_data::{load_idx, load_usps, LabeledDataset, PrototypeSet};
use ipkp_prototypes::{builtin_digit_prototypes, render_spec};

use crate::config::Config;
use crate::error::{io_err, ExpError, Result};

/// Datasets and prototypes resolved from a [`Config`].
#[derive(Clone, Debug)]
pub struct DataContext {
    /// Training pool; train/validation splits are drawn from it per repetition.
    pub pool: LabeledDataset,
    pub test: LabeledDataset,
    /// Out-of-distribution test set, when configured and present.
    pub ood: Option<LabeledDataset>,
    pub surrogate: Option<LabeledDataset>,
    pub prototypes: PrototypeSet,
}

fn require(path: &Path, key: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ExpError::Config(format!("dataset.{key}: {} not found", path.display())))
    }
}

fn check_classes(ds: &LabeledDataset, cfg: &Config) -> Result<()> {
    if ds.class_count() > cfg.model.classes {
        return Err(ExpError::Config(format!(
            "{} has {} classes, model.classes = {}",
            ds.name,
            ds.class_count(),
            cfg.model.classes
        )));
    }
    let r = cfg.dataset.resolution;
    if ds.image_shape() != [1, r, r] {
        return Err(ExpError::Config(format!(
            "{} images are {:?}, expected [1, {r}, {r}]",
            ds.name,
            ds.image_shape()
        )));
    }
    Ok(())
}

/// Renders the configured prototype spec at the configured resolution.
pub fn load_prototypes(cfg: &Config) -> Result<PrototypeSet> {
    let r = cfg.dataset.resolution;
    if cfg.dataset.prototypes == "builtin" {
        return Ok(builtin_digit_prototypes(r, r)?);
    }
    let path = cfg.path(&cfg.dataset.prototypes);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(render_spec(&text, r, r)?)
}

fn load_pair(cfg: &Config, images: &str, labels: &str, key: &str) -> Result<LabeledDataset> {
    let (i, l) = (cfg.path(images), cfg.path(labels));
    require(&i, &format!("{key}_images"))?;
    require(&l, &format!("{key}_labels"))?;
    let ds = load_idx(&i, &l)?;
    check_classes(&ds, cfg)?;
    Ok(ds)
}

impl DataContext {
    /// Loads everything; `with_surrogate` also requires the surrogate source.
    pub fn load(cfg: &Config, with_surrogate: bool) -> Result<DataContext> {
        let d = &cfg.dataset;
        let pool = load_pair(cfg, &d.train_images, &d.train_labels, "train")?;
        let test = load_pair(cfg, &d.test_images, &d.test_labels, "test")?;
        let ood = if d.usps.is_empty() || !cfg.path(&d.usps).is_file() {
            None
        } else {
            let ds = load_usps(&cfg.path(&d.usps))?;
            check_classes(&ds, cfg)?;
            Some(ds)
        };
        let surrogate = if with_surrogate {
            if d.surrogate_images.is_empty() {
                return Err(ExpError::Config("dataset.surrogate_images is required by the selected schemes".into()));
            }
            Some(load_pair(cfg, &d.surrogate_images, &d.surrogate_labels, "surrogate")?)
        } else {
            None
        };
        let prototypes = load_prototypes(cfg)?;
        if prototypes.class_count() != cfg.model.classes {
            return Err(ExpError::Config(format!(
                "prototype spec covers {} classes, model.classes = {}",
                prototypes.class_count(),
                cfg.model.classes
            )));
        }
        Ok(DataContext {
            pool,
            test,
            ood,
            surrogate,
            prototypes,
        })
    }
}
