//! Weight checkpoints for one seed's trained models.
//!
//! Layout under a `weights/` directory:
//!
//! ```text
//! standalone-device-{i}.dgw   one per device
//! central-discriminator.dgw
//! distributed-device-{i}.dgw  the discriminator resident on device i
//! distributed-generator.dgw   the center's generator
//! ```

use std::path::{Path, PathBuf};

use dgids_core::gan::{Discriminator, GanConfig, Generator};
use dgids_core::nn::io;

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct ModelBundle {
    pub standalone: Vec<Discriminator>,
    pub central: Option<Discriminator>,
    pub distributed: Vec<Discriminator>,
    pub generator: Option<Generator>,
}

pub fn standalone_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("standalone-device-{i}.dgw"))
}

pub fn central_path(dir: &Path) -> PathBuf {
    dir.join("central-discriminator.dgw")
}

pub fn distributed_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("distributed-device-{i}.dgw"))
}

pub fn generator_path(dir: &Path) -> PathBuf {
    dir.join("distributed-generator.dgw")
}

/// Writes every model present in `bundle`; returns the files written.
pub fn save_models(bundle: &ModelBundle, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |params: &dgids_core::nn::Mlp, path: PathBuf| -> Result<(), CliError> {
        io::save(params, &path)?;
        written.push(path);
        Ok(())
    };
    for (i, d) in bundle.standalone.iter().enumerate() {
        put(d.params(), standalone_path(dir, i))?;
    }
    if let Some(d) = &bundle.central {
        put(d.params(), central_path(dir))?;
    }
    for (i, d) in bundle.distributed.iter().enumerate() {
        put(d.params(), distributed_path(dir, i))?;
    }
    if let Some(g) = &bundle.generator {
        put(g.params(), generator_path(dir))?;
    }
    Ok(written)
}

/// Which model families [`load_models`] should expect on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expect {
    pub standalone: bool,
    pub central: bool,
    pub distributed: bool,
}

/// Loads the families named in `expect`, checking every file against the
/// layer sizes `gan` implies for `data_dim` features.
pub fn load_models(
    dir: &Path,
    n_devices: usize,
    data_dim: usize,
    gan: &GanConfig,
    expect: Expect,
) -> Result<ModelBundle, CliError> {
    let d_sizes = gan.discriminator_sizes(data_dim);
    let g_sizes = gan.generator_sizes(data_dim);
    let disc = |path: PathBuf| -> Result<Discriminator, CliError> {
        Ok(Discriminator::new(io::load_expecting(path, &d_sizes)?)?)
    };
    let mut bundle = ModelBundle::default();
    if expect.standalone {
        bundle.standalone = (0..n_devices)
            .map(|i| disc(standalone_path(dir, i)))
            .collect::<Result<_, _>>()?;
    }
    if expect.central {
        bundle.central = Some(disc(central_path(dir))?);
    }
    if expect.distributed {
        bundle.distributed = (0..n_devices)
            .map(|i| disc(distributed_path(dir, i)))
            .collect::<Result<_, _>>()?;
        let params = io::load_expecting(generator_path(dir), &g_sizes)?;
        bundle.generator = Some(Generator::new(params, gan.prior)?);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_gan() -> GanConfig {
        GanConfig {
            latent_dim: 3,
            generator_hidden: vec![5],
            discriminator_hidden: vec![4, 3],
            ..GanConfig::default()
        }
    }

    fn bundle(gan: &GanConfig, n: usize, dim: usize) -> ModelBundle {
        let d = |s: u64| gan.init_discriminator(dim, s).unwrap();
        ModelBundle {
            standalone: (0..n as u64).map(d).collect(),
            central: Some(d(100)),
            distributed: (0..n as u64).map(|i| d(200 + i)).collect(),
            generator: Some(gan.init_generator(dim, 300).unwrap()),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let gan = small_gan();
        let original = bundle(&gan, 3, 2);
        let dir = tempfile::tempdir().unwrap();
        let files = save_models(&original, dir.path()).unwrap();
        assert_eq!(files.len(), 3 + 1 + 3 + 1);
        let all = Expect { standalone: true, central: true, distributed: true };
        let loaded = load_models(dir.path(), 3, 2, &gan, all).unwrap();
        let bits = |d: &Discriminator| d.params().flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        for (a, b) in original.standalone.iter().zip(&loaded.standalone) {
            assert_eq!(bits(a), bits(b));
        }
        for (a, b) in original.distributed.iter().zip(&loaded.distributed) {
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(bits(original.central.as_ref().unwrap()), bits(loaded.central.as_ref().unwrap()));
        assert_eq!(
            original.generator.as_ref().unwrap().params(),
            loaded.generator.as_ref().unwrap().params()
        );
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let gan = small_gan();
        let dir = tempfile::tempdir().unwrap();
        save_models(&bundle(&gan, 2, 2), dir.path()).unwrap();
        let wider = GanConfig { discriminator_hidden: vec![5, 3], ..small_gan() };
        let only_central = Expect { standalone: false, central: true, distributed: false };
        let err = load_models(dir.path(), 2, 2, &wider, only_central).unwrap_err();
        assert!(matches!(err, CliError::Core(dgids_core::Error::Format { .. })), "{err}");
    }

    #[test]
    fn missing_files_are_io_failures() {
        let dir = tempfile::tempdir().unwrap();
        let only_central = Expect { standalone: false, central: true, distributed: false };
        let err = load_models(dir.path(), 2, 2, &small_gan(), only_central).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
