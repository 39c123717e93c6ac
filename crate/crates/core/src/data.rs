//! Labelled datasets: loading a class-per-directory tree, seeded stratified
//! splitting and mini-batch ordering.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pgm::{DefaultDecoder, ImageDecoder};
use crate::preprocess::{preprocess, RawImage};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stream ids keep the split and batch shuffles independent of each other
/// and of weight initialisation for the same seed.
const SPLIT_STREAM: u64 = 1 << 32;
const BATCH_STREAM: u64 = 2 << 32;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample<T> {
    pub image: Tensor<T>,
    pub class_index: usize,
}

/// A file that could not be turned into an example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub examples: Vec<LabeledExample<T>>,
    /// Class directory names in byte order; an example's class index is the
    /// position of its directory here.
    pub class_names: Vec<String>,
    pub report: LoadReport,
}

#[derive(Clone, Debug)]
pub struct DatasetSplit<T> {
    pub train: Vec<LabeledExample<T>>,
    pub test: Vec<LabeledExample<T>>,
    pub class_names: Vec<String>,
}

/// Class directories under `root`, sorted by name, each with its sorted
/// regular files.
pub fn scan_class_tree(root: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let mut classes = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let Ok(name) = entry.file_name().into_string() else {
            return Err(Error::Argument(format!(
                "class directory {:?} is not valid UTF-8",
                entry.path()
            )));
        };
        let mut files = Vec::new();
        for file in fs::read_dir(entry.path())? {
            let file = file?;
            if file.file_type()?.is_file() {
                files.push(file.path());
            }
        }
        files.sort();
        classes.push((name, files));
    }
    classes.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    if classes.is_empty() {
        return Err(Error::Argument(format!(
            "{} contains no class directories",
            root.display()
        )));
    }
    Ok(classes)
}

/// Loads every image under `root/<class>/` through the preprocessing
/// pipeline. Unreadable files are skipped and listed in the report.
pub fn load_dataset<T: Scalar>(root: &Path, already_processed: bool) -> Result<Dataset<T>> {
    load_dataset_with(root, &DefaultDecoder, |img| preprocess(img, already_processed))
}

/// As [`load_dataset`] with a custom decoder and pipeline.
pub fn load_dataset_with<T: Scalar>(
    root: &Path,
    decoder: &dyn ImageDecoder,
    pipeline: impl Fn(&RawImage) -> Result<Tensor<T>>,
) -> Result<Dataset<T>> {
    let classes = scan_class_tree(root)?;
    let mut examples = Vec::new();
    let mut report = LoadReport::default();
    let mut class_names = Vec::with_capacity(classes.len());
    for (class_index, (name, files)) in classes.into_iter().enumerate() {
        class_names.push(name);
        for path in files {
            let loaded = fs::read(&path)
                .map_err(Error::from)
                .and_then(|bytes| decoder.decode(&bytes))
                .and_then(|img| pipeline(&img));
            match loaded {
                Ok(image) => examples.push(LabeledExample { image, class_index }),
                Err(e) => report.skipped.push(SkippedFile {
                    path,
                    reason: e.to_string(),
                }),
            }
        }
    }
    if examples.is_empty() {
        return Err(Error::Argument(format!(
            "no decodable images under {} ({} files skipped)",
            root.display(),
            report.skipped.len()
        )));
    }
    report.loaded = examples.len();
    Ok(Dataset {
        examples,
        class_names,
        report,
    })
}

/// `floor(ratio · n)`, tolerant of ratios like 0.29 whose product lands a
/// hair below an integer.
fn train_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Indices of the train and test parts of a labelled collection.
///
/// Stratified: each class is shuffled on its own and its first
/// `floor(ratio · n_class)` members go to train. Otherwise the whole
/// collection is shuffled once. Both parts keep class-major order.
pub fn split_indices(
    labels: &[usize],
    class_count: usize,
    ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::Argument(format!(
            "label {bad} out of range for {class_count} classes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);

    if !stratified {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        let k = train_count(ratio, order.len());
        let test = order.split_off(k);
        return Ok((order, test));
    }

    let mut by_class = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Argument(format!("class {class} has no examples to stratify")));
        }
        members.shuffle(&mut rng);
        let k = train_count(ratio, members.len());
        test.extend_from_slice(&members[k..]);
        members.truncate(k);
        train.extend(members);
    }
    Ok((train, test))
}

/// Partitions examples into train and test sets; see [`split_indices`].
pub fn split_dataset<T: Scalar>(
    examples: Vec<LabeledExample<T>>,
    class_names: Vec<String>,
    ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit<T>> {
    let labels: Vec<usize> = examples.iter().map(|e| e.class_index).collect();
    let (train_idx, test_idx) = split_indices(&labels, class_names.len(), ratio, seed, stratified)?;
    let mut slots: Vec<Option<LabeledExample<T>>> = examples.into_iter().map(Some).collect();
    let mut take = |idx: Vec<usize>| -> Vec<LabeledExample<T>> {
        idx.into_iter()
            .map(|i| slots[i].take().expect("each index is used once"))
            .collect()
    };
    let train = take(train_idx);
    let test = take(test_idx);
    Ok(DatasetSplit {
        train,
        test,
        class_names,
    })
}

/// Mini-batches of example indices for one epoch, shuffled with a
/// generator derived from `(seed, epoch)`. The last batch may be short.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BATCH_STREAM + epoch as u64);
    order.shuffle(&mut rng);
    Ok(sequential_batches(order, batch_size))
}

pub(crate) fn sequential_batches(order: Vec<usize>, batch_size: usize) -> Vec<Vec<usize>> {
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
