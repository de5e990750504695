use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::ppm::decode_ppm;
use super::rawt::decode_rawt;
use super::resize::resize_bilinear;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Maximum number of batches prepared ahead of the consumer.
pub const READ_AHEAD: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    /// Already normalized `(H, W, C)` pixels.
    Memory(Arc<Tensor>),
}

impl ImageSource {
    /// Decodes to an `(H, W, C)` tensor with values in [0, 1].
    pub fn load(&self) -> Result<Tensor> {
        match self {
            ImageSource::Memory(t) => check_pixels(t.as_ref().clone(), "in-memory image"),
            ImageSource::File(path) => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                let named = |e: Error| Error::InvalidData(format!("{}: {e}", path.display()));
                let is_raw = path.extension().is_some_and(|x| x == "rawt");
                let tensor = if is_raw {
                    decode_rawt(&bytes).map_err(named)?
                } else {
                    let img = decode_ppm(&bytes).map_err(named)?;
                    let data = img.pixels.iter().map(|&p| p as f32 / 255.0).collect();
                    Tensor::from_vec(&[img.height, img.width, img.channels], data)?
                };
                check_pixels(tensor, &path.display().to_string())
            }
        }
    }
}

fn check_pixels(t: Tensor, name: &str) -> Result<Tensor> {
    if t.rank() != 3 {
        return Err(Error::InvalidData(format!(
            "{name}: expected an (H, W, C) image, got {:?}",
            t.shape()
        )));
    }
    if let Some(v) = t.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidData(format!(
            "{name}: pixel value {v} outside [0, 1]"
        )));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub source: ImageSource,
    pub label: usize,
}

/// Labelled images in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetIndex {
    pub records: Vec<Record>,
}

impl DatasetIndex {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.label > 1 {
                return Err(Error::InvalidLabel {
                    index: i,
                    label: r.label,
                });
            }
        }
        Ok(Self { records })
    }

    /// Wraps in-memory images with ids `"0"`, `"1"`, ...
    pub fn from_tensors(images: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let records = images
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (img, label))| Record {
                id: i.to_string(),
                source: ImageSource::Memory(Arc::new(img)),
                label,
            })
            .collect();
        Self::new(records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of benign (0) and malignant (1) records.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Writes the `id,label` CSV for this index.
    pub fn write_labels(&self, path: &Path) -> Result<()> {
        let mut text = String::from("id,label\n");
        for r in &self.records {
            text.push_str(&format!("{},{}\n", r.id, r.label));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads a labels CSV (header `id,label`) and resolves each id to
/// `root/<id>.ppm` or `root/<id>.rawt`.
pub fn load_index(root: &Path, csv_path: &Path) -> Result<DatasetIndex> {
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let name = csv_path.display().to_string();
    let mut records = Vec::new();
    let mut saw_header = false;
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("{name} row {line}"), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let at = || format!("{name} row {line}");
        if !saw_header {
            if row.len() != 2 || &row[0] != "id" || &row[1] != "label" {
                return Err(Error::parse(at(), "header must be exactly `id,label`"));
            }
            saw_header = true;
            continue;
        }
        if row.len() != 2 {
            return Err(Error::parse(at(), format!("expected 2 fields, got {}", row.len())));
        }
        let id = row[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(at(), "empty id"));
        }
        let label: usize = match &row[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::parse(
                    at(),
                    format!("label `{other}` for id `{id}` must be 0 or 1"),
                ))
            }
        };
        let path = ["ppm", "rawt"]
            .iter()
            .map(|ext| root.join(format!("{id}.{ext}")))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::InvalidData(format!(
                    "{}: no image file for id `{id}` under {}",
                    at(),
                    root.display()
                ))
            })?;
        records.push(Record {
            id,
            source: ImageSource::File(path),
            label,
        });
    }
    if !saw_header {
        return Err(Error::parse(name, "empty labels file"));
    }
    DatasetIndex::new(records)
}

/// Seeded shuffle, then the first `train` records form the training split
/// and the next `val` records the validation split.
pub fn split(
    index: &DatasetIndex,
    train: usize,
    val: usize,
    seed: u64,
) -> Result<(DatasetIndex, DatasetIndex)> {
    if train + val > index.len() {
        return Err(Error::InvalidSplit {
            train,
            val,
            available: index.len(),
        });
    }
    let mut order: Vec<usize> = (0..index.len()).collect();
    Rng::stream(seed, "split", 0).shuffle(&mut order);
    let take = |ids: &[usize]| DatasetIndex {
        records: ids.iter().map(|&i| index.records[i].clone()).collect(),
    };
    Ok((take(&order[..train]), take(&order[train..train + val])))
}

/// Record visiting order for one epoch; a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, shuffle: bool, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        Rng::stream(seed, "shuffle", epoch as u64).shuffle(&mut order);
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `(B, H, W, C)` with values in [0, 1].
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loads and resizes one image to `shape = [H, W, C]`.
pub fn load_resized(record: &Record, shape: [usize; 3]) -> Result<Tensor> {
    let img = record.source.load()?;
    let (h, w, c) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    if c != shape[2] {
        return Err(Error::InvalidData(format!(
            "image `{}` has shape ({h}, {w}, {c}) but the model expects ({}, {}, {}): channel counts differ",
            record.id, shape[0], shape[1], shape[2]
        )));
    }
    resize_bilinear(&img, shape[0], shape[1])
}

fn assemble(records: &[&Record], shape: [usize; 3]) -> Result<Batch> {
    let per = shape.iter().product::<usize>();
    let mut data = Vec::with_capacity(records.len() * per);
    for r in records {
        data.extend_from_slice(load_resized(r, shape)?.data());
    }
    Ok(Batch {
        images: Tensor::from_vec(&[records.len(), shape[0], shape[1], shape[2]], data)?,
        labels: records.iter().map(|r| r.label).collect(),
    })
}

/// Ordered batch stream decoded on a background thread, at most
/// [`READ_AHEAD`] batches ahead of the consumer.
pub struct BatchStream {
    rx: Option<Receiver<Result<Batch>>>,
    worker: Option<JoinHandle<()>>,
}

impl Iterator for BatchStream {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        let item = self.rx.as_ref()?.recv().ok();
        if matches!(item, None | Some(Err(_))) {
            self.rx = None;
        }
        item
    }
}

impl Drop for BatchStream {
    fn drop(&mut self) {
        // closing the channel makes the worker's next send fail
        self.rx = None;
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// Streams `index` in batches of `batch_size`, resized to `shape`.
pub fn batches(
    index: &DatasetIndex,
    shape: [usize; 3],
    batch_size: usize,
    shuffle: bool,
    seed: u64,
    epoch: usize,
) -> Result<BatchStream> {
    if batch_size == 0 {
        return Err(Error::InvalidBatch("batch size must be at least 1".into()));
    }
    let order = epoch_order(index.len(), shuffle, seed, epoch);
    let records: Vec<Record> = order.iter().map(|&i| index.records[i].clone()).collect();
    // one prepared batch may wait in `send` on top of the channel buffer
    let (tx, rx) = sync_channel(READ_AHEAD - 1);
    let worker = std::thread::spawn(move || {
        for chunk in records.chunks(batch_size) {
            let refs: Vec<&Record> = chunk.iter().collect();
            let batch = assemble(&refs, shape);
            let failed = batch.is_err();
            if tx.send(batch).is_err() || failed {
                return;
            }
        }
    });
    Ok(BatchStream {
        rx: Some(rx),
        worker: Some(worker),
    })
}

/// A fully decoded dataset held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    shape: [usize; 3],
    pixels: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn load(index: &DatasetIndex, shape: [usize; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(index.len() * shape.iter().product::<usize>());
        let mut labels = Vec::with_capacity(index.len());
        for batch in batches(index, shape, 64, false, 0, 0)? {
            let batch = batch?;
            pixels.extend_from_slice(batch.images.data());
            labels.extend(batch.labels);
        }
        Ok(Self {
            shape,
            pixels,
            labels,
        })
    }

    pub fn from_batch(batch: Batch) -> Result<Self> {
        match *batch.images.shape() {
            [_, h, w, c] => Ok(Self {
                shape: [h, w, c],
                pixels: batch.images.into_data(),
                labels: batch.labels,
            }),
            _ => Err(Error::shape(format!(
                "batch images must be (B, H, W, C), got {:?}",
                batch.images.shape()
            ))),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn gather(&self, ids: &[usize]) -> Batch {
        let per = self.shape.iter().product::<usize>();
        let mut data = Vec::with_capacity(ids.len() * per);
        for &i in ids {
            data.extend_from_slice(&self.pixels[i * per..(i + 1) * per]);
        }
        let [h, w, c] = self.shape;
        Batch {
            images: Tensor::from_vec(&[ids.len(), h, w, c], data).expect("gathered batch shape"),
            labels: ids.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same ordering contract as [`batches`].
    pub fn batches(
        &self,
        batch_size: usize,
        shuffle: bool,
        seed: u64,
        epoch: usize,
    ) -> Result<impl Iterator<Item = Batch> + '_> {
        if batch_size == 0 {
            return Err(Error::InvalidBatch("batch size must be at least 1".into()));
        }
        let order = epoch_order(self.len(), shuffle, seed, epoch);
        Ok((0..self.len().div_ceil(batch_size)).map(move |b| {
            let end = ((b + 1) * batch_size).min(order.len());
            self.gather(&order[b * batch_size..end])
        }))
    }
}
