//! Fits a unit sphere from 200 surface samples and reports overlap and
//! surface distance against the exact shape.
//!
//! cargo run --release -p vinr --example sphere_fit -- [epochs] [lr]

use std::time::Instant;

use vinr::csg::SdfSource;
use vinr::geometry::Aabb;
use vinr::metrics::{average_surface_distance_to, dice, split_train_heldout};
use vinr::synthetic::{sample_analytic_surface, AnalyticShape};
use vinr::training::{fit, TrainConfig};
use vinr::{Lattice, Point3};

fn main() -> vinr::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = TrainConfig::desk();
    if let Some(e) = args.get(1) {
        config.epochs = e.parse().expect("epochs");
    }
    if let Some(lr) = args.get(2) {
        config.learning_rate = lr.parse().expect("learning rate");
    }
    let sphere = AnalyticShape::sphere(Point3::ORIGIN, 1.0);
    let cloud = sample_analytic_surface(&sphere, 300, 0)?;
    let (train, heldout) = split_train_heldout(&cloud, 200, 1)?;

    let start = Instant::now();
    let (model, report) = fit(&train, &config)?;
    let seconds = start.elapsed().as_secs_f64();

    let bbox = Aabb::new(Point3::splat(-1.5), Point3::splat(1.5));
    let recon = SdfSource::model(&model, 0)?;
    let dsc = dice(&recon, &SdfSource::Analytic(&sphere), &Lattice::cubic(96, bbox)?)?;
    let asd = average_surface_distance_to(&recon, &Lattice::cubic(128, bbox)?, &heldout)?;
    let last = report.final_loss().expect("at least one epoch");
    println!(
        "epochs {} lr {} fit {seconds:.1}s loss {:.5} (data {:.5}, eik {:.5}) dsc {dsc:.4} asd {asd:.5}",
        config.epochs, config.learning_rate, last.total, last.data, last.eikonal
    );
    Ok(())
}
