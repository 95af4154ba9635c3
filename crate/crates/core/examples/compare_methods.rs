//! Geometry and false-positive statistics of every cropping method on a
//! single synthetic multi-object scene.

use gccrop::dataio::{gen_synthetic, SyntheticSceneSpec};
use gccrop::{estimate_fp_rate, geometry_stats, CropperConfig, Method, RngStream};

fn main() -> gccrop::Result<()> {
    let spec = SyntheticSceneSpec::multi_object_benchmark();
    let (_, scenes) = gen_synthetic(&spec, 1, &RngStream::new(0))?;
    let scene = &scenes[0];
    println!("scene objects: {:?}", scene.objects);
    println!(
        "{:<11} {:>5} {:>8} {:>9} {:>8} {:>8}",
        "method", "alpha", "pair_iou", "ctr_dist", "oob", "fp_rate"
    );
    for method in Method::ALL {
        for alpha in [0.1, 1.0] {
            let cfg = CropperConfig::new(method, alpha, 0.4);
            let g = geometry_stats(&cfg, spec.dims, 20_000, 8, &mut RngStream::new(1))?;
            let fp = estimate_fp_rate(&cfg, scene, 0.2, 20_000, &mut RngStream::new(2))?;
            let shown = if method == Method::RandomCrop {
                "-".to_string()
            } else {
                alpha.to_string()
            };
            println!(
                "{:<11} {shown:>5} {:>8.3} {:>9.2} {:>8.3} {:>8.3}",
                method.as_str(),
                g.mean_pair_iou,
                g.mean_center_distance,
                g.oob_area_fraction,
                fp.fp_rate
            );
            if method == Method::RandomCrop {
                break;
            }
        }
    }
    Ok(())
}
