//! Named components: embedders, generators, attribute directions and face
//! parsers, each resolved through a registry of factories.
//!
//! The built-in models are trained from the synthetic face population on
//! first use and cached under `$DUALCLOAK_CACHE` (falling back to a
//! directory in the system temp dir). Training is deterministic, so a
//! missing or deleted cache only costs time.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::convnet::{ConvArch, ToyConvNet};
use crate::embedding::{FaceEmbedder, ToyLinear};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::manifold::{encode, AttributeDirection, GenerativeModel, ToyDecoder, ToyIdentity};
use crate::masking::{AnnotationParser, FaceParser, LabelMap, LabelSet, StaticParser};
use crate::synth::{render_face, Nuisance, Population, DEFAULT_SIZE};

pub const CACHE_ENV: &str = "DUALCLOAK_CACHE";

/// Changes whenever a built-in training recipe changes, invalidating caches.
pub const ZOO_VERSION: u32 = 1;

pub const IMAGE_SHAPE: (usize, usize, usize) = (DEFAULT_SIZE, DEFAULT_SIZE, 3);
pub const EMBED_DIM: usize = 32;
pub const LATENT_DIM: usize = 48;
const TRAIN_SEED: u64 = 2024;
const TRAIN_IDS: usize = 60;
const TRAIN_PER_ID: usize = 8;

/// `(name, architecture, seed)` of the built-in convolutional embedders.
pub const CONVNETS: [(&str, ConvArch, u64); 4] = [
    ("convnet-a", ConvArch { kernel: 5, channels: (8, 12), pools: (2, 4), gain: 1.0 }, 11),
    ("convnet-b", ConvArch { kernel: 3, channels: (6, 12), pools: (2, 4), gain: 1.2 }, 22),
    ("convnet-c", ConvArch { kernel: 7, channels: (8, 12), pools: (4, 2), gain: 0.9 }, 33),
    ("convnet-d", ConvArch { kernel: 5, channels: (10, 12), pools: (4, 2), gain: 1.1 }, 44),
];

/// The attack ensemble and held-out evaluator used by default.
pub const DEFAULT_ENSEMBLE: [&str; 3] = ["convnet-a", "convnet-b", "convnet-c"];
pub const DEFAULT_HOLDOUT: &str = "convnet-d";

type Factory<T> = Box<dyn Fn(&Zoo) -> Result<Arc<T>> + Send + Sync>;

/// Name-keyed factories for one kind of component.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&Zoo) -> Result<Arc<T>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    fn build(&self, zoo: &Zoo, name: &str) -> Result<Arc<T>> {
        let f = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        f(zoo)
    }
}

/// Resolves components by name, memoizing each one for the life of the zoo.
pub struct Zoo {
    cache_dir: Option<PathBuf>,
    embedders: Registry<dyn FaceEmbedder>,
    generators: Registry<dyn GenerativeModel>,
    built_embedders: Mutex<HashMap<String, Arc<dyn FaceEmbedder>>>,
    built_generators: Mutex<HashMap<String, Arc<dyn GenerativeModel>>>,
    training: Mutex<Option<Arc<Vec<(ImageTensor, usize)>>>>,
}

impl Zoo {
    /// Built-in registries, cache directory from `DUALCLOAK_CACHE`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("dualcloak-cache"));
        Self::with_cache_dir(Some(dir))
    }

    pub fn with_cache_dir(cache_dir: Option<PathBuf>) -> Self {
        let mut zoo = Self {
            cache_dir,
            embedders: Registry::new("embedder"),
            generators: Registry::new("generator"),
            built_embedders: Mutex::default(),
            built_generators: Mutex::default(),
            training: Mutex::default(),
        };
        for (name, arch, seed) in CONVNETS {
            zoo.embedders.register(name, move |z: &Zoo| {
                Ok(Arc::new(z.convnet(name, arch, seed)?) as Arc<dyn FaceEmbedder>)
            });
        }
        for (name, seed) in [("toy-linear", 7), ("toy-linear-b", 8)] {
            zoo.embedders.register(name, move |_: &Zoo| {
                Ok(Arc::new(ToyLinear::seeded(name, IMAGE_SHAPE, EMBED_DIM, seed)) as Arc<dyn FaceEmbedder>)
            });
        }
        zoo.generators.register("identity", |_: &Zoo| {
            Ok(Arc::new(ToyIdentity::new(IMAGE_SHAPE)) as Arc<dyn GenerativeModel>)
        });
        zoo.generators.register("toy-decoder", |z: &Zoo| {
            Ok(Arc::new(z.decoder()?) as Arc<dyn GenerativeModel>)
        });
        zoo
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    pub fn embedder_registry_mut(&mut self) -> &mut Registry<dyn FaceEmbedder> {
        &mut self.embedders
    }

    pub fn generator_registry_mut(&mut self) -> &mut Registry<dyn GenerativeModel> {
        &mut self.generators
    }

    pub fn embedder_names(&self) -> Vec<&str> {
        self.embedders.names()
    }

    pub fn generator_names(&self) -> Vec<&str> {
        self.generators.names()
    }

    pub fn embedder(&self, name: &str) -> Result<Arc<dyn FaceEmbedder>> {
        if let Some(e) = self.built_embedders.lock().unwrap().get(name) {
            return Ok(e.clone());
        }
        let e = self.embedders.build(self, name)?;
        self.built_embedders
            .lock()
            .unwrap()
            .insert(name.to_string(), e.clone());
        Ok(e)
    }

    pub fn generator(&self, name: &str) -> Result<Arc<dyn GenerativeModel>> {
        if let Some(g) = self.built_generators.lock().unwrap().get(name) {
            return Ok(g.clone());
        }
        let g = self.generators.build(self, name)?;
        self.built_generators
            .lock()
            .unwrap()
            .insert(name.to_string(), g.clone());
        Ok(g)
    }

    /// Built-in attribute direction `name` ("smile", "age" or "none") in the
    /// latent space of `generator`.
    pub fn attribute(&self, generator: &str, name: &str) -> Result<AttributeDirection> {
        let gen = self.generator(generator)?;
        if name == "none" {
            return Ok(AttributeDirection::none(gen.latent_dim()));
        }
        let vary: fn(&mut Nuisance, f64) = match name {
            "smile" => |n, v| n.smile = v,
            "age" => |n, v| n.age = v,
            other => {
                return Err(Error::UnknownName {
                    kind: "attribute",
                    name: other.to_string(),
                    known: "age, none, smile".into(),
                })
            }
        };
        let file = format!("attr-{generator}-{name}-v{ZOO_VERSION}.json");
        if let Some(path) = self.cached(&file) {
            if let Ok(a) = AttributeDirection::load_json(&path) {
                if a.dim() == gen.latent_dim() {
                    return Ok(a);
                }
            }
        }
        let attr = discover_attribute(gen.as_ref(), name, vary)?;
        if let Some(path) = self.cache_path(&file) {
            let tmp = tmp_sibling(&path);
            if attr.save_json(&tmp).is_ok() {
                let _ = std::fs::rename(&tmp, &path);
            }
        }
        Ok(attr)
    }

    /// `annotation` reads label maps from `annotation_dir`; `all-hair`
    /// labels every pixel as hair. `hair_label` overrides the hair class of
    /// the CelebAMask-HQ table.
    pub fn parser(
        &self,
        name: &str,
        annotation_dir: Option<&Path>,
        hair_label: Option<u8>,
    ) -> Result<Arc<dyn FaceParser>> {
        let mut labels = LabelSet::celebamask_hq();
        if let Some(h) = hair_label {
            if !labels.contains(h) {
                return Err(Error::param(format!("hair label {h} is not in the label table")));
            }
            labels.hair = h;
        }
        match name {
            "annotation" => {
                let dir = annotation_dir.ok_or_else(|| {
                    Error::param("parser `annotation` needs an annotation directory")
                })?;
                Ok(Arc::new(AnnotationParser::new(dir, labels)))
            }
            "all-hair" => {
                let (h, w, _) = IMAGE_SHAPE;
                let hair = labels.hair;
                Ok(Arc::new(StaticParser::new(LabelMap::new(h, w, vec![hair; h * w])?, labels)))
            }
            other => Err(Error::UnknownName {
                kind: "parser",
                name: other.to_string(),
                known: "all-hair, annotation".into(),
            }),
        }
    }

    fn cache_path(&self, file: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        std::fs::create_dir_all(dir).ok()?;
        Some(dir.join(file))
    }

    fn cached(&self, file: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(file)).filter(|p| p.is_file())
    }

    fn training_set(&self) -> Result<Arc<Vec<(ImageTensor, usize)>>> {
        let mut slot = self.training.lock().unwrap();
        if let Some(t) = slot.as_ref() {
            return Ok(t.clone());
        }
        let pop = Population::new(TRAIN_SEED, "train", TRAIN_IDS);
        let data = Arc::new(pop.labelled(TRAIN_PER_ID, DEFAULT_SIZE)?);
        *slot = Some(data.clone());
        Ok(data)
    }

    fn convnet(&self, name: &str, arch: ConvArch, seed: u64) -> Result<ToyConvNet> {
        let file = format!("{name}-v{ZOO_VERSION}.json");
        if let Some(path) = self.cached(&file) {
            if let Ok(net) = ToyConvNet::load_json(&path) {
                return Ok(net);
            }
        }
        tracing::info!(model = name, "training embedder");
        let net = ToyConvNet::train(name, IMAGE_SHAPE, arch, seed, &self.training_set()?, EMBED_DIM)?;
        if let Some(path) = self.cache_path(&file) {
            let tmp = tmp_sibling(&path);
            if net.save_json(&tmp).is_ok() {
                let _ = std::fs::rename(&tmp, &path);
            }
        }
        Ok(net)
    }

    fn decoder(&self) -> Result<ToyDecoder> {
        let file = format!("toy-decoder-v{ZOO_VERSION}.bin");
        if let Some(path) = self.cached(&file) {
            if let Ok(dec) = ToyDecoder::load(&path) {
                return Ok(dec);
            }
        }
        tracing::info!("fitting toy decoder");
        let images: Vec<ImageTensor> = self.training_set()?.iter().map(|(i, _)| i.clone()).collect();
        let dec = ToyDecoder::fit("toy-decoder", &images, LATENT_DIM)?;
        if let Some(path) = self.cache_path(&file) {
            let tmp = tmp_sibling(&path);
            if dec.save(&tmp).is_ok() {
                let _ = std::fs::rename(&tmp, &path);
            }
        }
        Ok(dec)
    }
}

impl Default for Zoo {
    fn default() -> Self {
        Self::from_env()
    }
}

/// Unique temp path next to `path`, so concurrent writers never expose a
/// half-written cache file.
fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{}.{:?}.tmp", std::process::id(), std::thread::current().id()));
    path.with_file_name(name)
}

/// Mean latent displacement between attribute-off and attribute-on
/// renderings of the training identities.
fn discover_attribute(
    gen: &dyn GenerativeModel,
    name: &str,
    vary: fn(&mut Nuisance, f64),
) -> Result<AttributeDirection> {
    let pop = Population::new(TRAIN_SEED, "train", TRAIN_IDS);
    let mut diff = vec![0.0; gen.latent_dim()];
    for (i, id) in pop.ids.iter().enumerate() {
        let mut nu = pop.nuisance(i, 0);
        vary(&mut nu, 0.0);
        let (off, _) = render_face(id, &nu, DEFAULT_SIZE)?;
        vary(&mut nu, 1.0);
        let (on, _) = render_face(id, &nu, DEFAULT_SIZE)?;
        let (z0, z1) = (encode(gen, &off)?, encode(gen, &on)?);
        for (d, (a, b)) in diff.iter_mut().zip(z0.as_slice().iter().zip(z1.as_slice())) {
            *d += (b - a) / pop.len() as f64;
        }
    }
    let strength = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if strength == 0.0 {
        return Ok(AttributeDirection::none(gen.latent_dim()));
    }
    AttributeDirection::new(name, diff, strength)
}
