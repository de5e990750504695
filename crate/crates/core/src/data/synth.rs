//! Synthetic two-class texture corpus: smooth blobs (label 0) against
//! oriented stripes (label 1).

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use super::index::{load_index, DatasetIndex};
use super::ppm::{encode_ppm, Image};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MIN_RESOLUTION: usize = 16;
/// Uniform pixel noise amplitude, as a fraction of full scale.
pub const NOISE: f64 = 0.05;

fn tint(rng: &mut Rng) -> [f64; 3] {
    [rng.range_f64(0.5, 1.0), rng.range_f64(0.5, 1.0), rng.range_f64(0.5, 1.0)]
}

/// Low-frequency field in [0, 1]: a sum of Gaussian bumps, peak-normalized.
fn blob_field(res: usize, rng: &mut Rng) -> Vec<f64> {
    let n = 3 + rng.below(4) as usize;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.range_f64(0.0, res as f64),
                rng.range_f64(0.0, res as f64),
                rng.range_f64(0.12, 0.3) * res as f64,
                rng.range_f64(0.4, 1.0),
            )
        })
        .collect();
    let mut field = vec![0.0; res * res];
    for y in 0..res {
        for x in 0..res {
            field[y * res + x] = bumps
                .iter()
                .map(|&(cx, cy, s, a)| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum();
        }
    }
    let peak = field.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    field.iter_mut().for_each(|v| *v /= peak);
    field
}

/// High-frequency field in [0, 1]: a sinusoid whose wave vector lies
/// within 45 degrees of the horizontal axis, period 3 to 6 pixels.
fn stripe_field(res: usize, rng: &mut Rng) -> Vec<f64> {
    let angle = rng.range_f64(-PI / 4.0, PI / 4.0);
    let period = rng.range_f64(3.0, 6.0);
    let phase = rng.range_f64(0.0, 2.0 * PI);
    let (kx, ky) = (angle.cos() * 2.0 * PI / period, angle.sin() * 2.0 * PI / period);
    let mut field = vec![0.0; res * res];
    for y in 0..res {
        for x in 0..res {
            field[y * res + x] = 0.5 + 0.5 * (kx * x as f64 + ky * y as f64 + phase).sin();
        }
    }
    field
}

/// Image number `index` of a corpus; a pure function of its arguments.
pub fn synth_image(label: usize, res: usize, seed: u64, index: u64) -> Image {
    let mut rng = Rng::stream(seed, "synth", index);
    let field = if label == 0 {
        blob_field(res, &mut rng)
    } else {
        stripe_field(res, &mut rng)
    };
    let tint = tint(&mut rng);
    let mut pixels = Vec::with_capacity(res * res * 3);
    for f in field {
        for t in tint {
            let v = 0.15 + 0.7 * f * t + rng.range_f64(-NOISE, NOISE);
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Image::new(res, res, 3, pixels).expect("synthetic image size")
}

/// Writes `2 * n` images (alternating labels 0, 1) and `labels.csv` into
/// `out`, then returns the index read back from disk.
pub fn synth_generate(n: usize, res: usize, seed: u64, out: &Path) -> Result<DatasetIndex> {
    if n == 0 {
        return Err(Error::InvalidConfig("synthetic corpus needs n >= 1 per class".into()));
    }
    if res < MIN_RESOLUTION {
        return Err(Error::InvalidConfig(format!(
            "synthetic resolution {res} is below the minimum {MIN_RESOLUTION}"
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut csv = String::from("id,label\n");
    for i in 0..2 * n {
        let label = i % 2;
        let id = format!("img_{i:05}");
        let path = out.join(format!("{id}.ppm"));
        let img = synth_image(label, res, seed, i as u64);
        fs::write(&path, encode_ppm(&img)).map_err(|e| Error::io(&path, e))?;
        csv.push_str(&format!("{id},{label}\n"));
    }
    let csv_path = out.join("labels.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    load_index(out, &csv_path)
}

/// Mean absolute horizontal difference over all channels, in [0, 1] units.
pub fn mean_horizontal_gradient(img: &Image) -> f64 {
    let (w, c) = (img.width, img.channels);
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..img.height {
        for x in 1..w {
            for ch in 0..c {
                let a = img.pixels[(y * w + x) * c + ch] as f64;
                let b = img.pixels[(y * w + x - 1) * c + ch] as f64;
                total += (a - b).abs() / 255.0;
                count += 1;
            }
        }
    }
    total / count.max(1) as f64
}
