//! Simulate `Kf` for the Shepp-Logan phantom and write CSV and PGM files.
//!
//! cargo run --release --example forward_model -- [n] [angles] [out_dir]

use std::env;
use std::error::Error;
use std::path::PathBuf;

use spixct::io::{write_field, write_image, write_pgm, PgmEncoding};
use spixct::phantom::generate_shepp_logan;
use spixct::singlepixel::single_pixel_forward;
use spixct::Lattice;

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(101), |s| s.parse())?;
    let angles: usize = args.get(1).map_or(Ok(360), |s| s.parse())?;
    let out = PathBuf::from(args.get(2).map_or("target/forward_model", String::as_str));
    std::fs::create_dir_all(&out)?;

    let phantom = generate_shepp_logan(n, 1.0)?;
    let field = single_pixel_forward(&phantom, angles)?;

    let (lo, hi) = field.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("Kf on {n}x{n} with {angles} directions: min {lo:.6}, max {hi:.6} (2π = {:.6})", std::f64::consts::TAU);
    let c = n / 2;
    println!("centre value {:.6}", field.values()[[c, c]]);

    write_image(&phantom, out.join("phantom.csv"))?;
    write_field(&field, out.join("field.csv"))?;
    write_pgm(phantom.values(), out.join("phantom.pgm"), PgmEncoding::Binary)?;
    write_pgm(field.values(), out.join("field.pgm"), PgmEncoding::Binary)?;
    println!("wrote {}", out.display());
    Ok(())
}
