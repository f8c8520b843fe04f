#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use latent_guard::idx::{write_images, write_labels};

/// Digit `d` is drawn as a bright 8x8 square at a digit-specific position,
/// jittered by the sample index.
fn digit_images(n: usize, salt: usize) -> (Vec<u8>, Vec<u8>) {
    let mut pixels = vec![0u8; n * 784];
    let labels: Vec<u8> = (0..n).map(|i| ((i * 7 + salt) % 10) as u8).collect();
    for (i, &d) in labels.iter().enumerate() {
        let d = d as usize;
        let r0 = 2 + (d / 5) * 12 + (i + salt) % 3;
        let c0 = 2 + (d % 5) * 4 + (i / 3 + salt) % 3;
        for r in r0..r0 + 8 {
            for c in c0..c0 + 8 {
                pixels[i * 784 + r * 28 + c] = 180 + ((i * 13) % 70) as u8;
            }
        }
    }
    (pixels, labels)
}

/// Writes a small MNIST-shaped dataset in IDX format.
pub fn synthetic_mnist(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let (p, l) = digit_images(400, 0);
    write_images(&dir.join("train-images-idx3-ubyte"), 28, 28, &p).unwrap();
    write_labels(&dir.join("train-labels-idx1-ubyte"), &l).unwrap();
    let (p, l) = digit_images(120, 3);
    write_images(&dir.join("t10k-images-idx3-ubyte"), 28, 28, &p).unwrap();
    write_labels(&dir.join("t10k-labels-idx1-ubyte"), &l).unwrap();
}

/// Flags that keep training on the synthetic set to a few seconds.
pub const FAST: [&str; 8] = [
    "--max-epochs",
    "2",
    "--patience",
    "1",
    "--batch-size",
    "16",
    "--val-size",
    "80",
];

pub fn cli(args: &[&str], data_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-guard"))
        .args(args)
        .env("LATENT_GUARD_DATA_DIR", data_dir)
        .output()
        .expect("binary runs")
}

pub fn train(data_dir: &Path, out: &Path, class: u8, k: usize, seed: u64) -> Output {
    let (class, k, seed) = (class.to_string(), k.to_string(), seed.to_string());
    let mut args = vec![
        "train",
        "--quiet",
        "--class",
        &class,
        "--bottleneck",
        &k,
        "--seed",
        &seed,
    ];
    let out = out.to_str().unwrap();
    args.extend(["--out", out]);
    args.extend(FAST);
    cli(&args, data_dir)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
