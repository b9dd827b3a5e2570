//! Both vectorizations of one shape: a 50×50 persistence image per
//! direction and the eight bottleneck amplitudes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shapetopo::experiment::mask_diagrams;
use shapetopo::filtration::make_directions;
use shapetopo::mask::normalize_mask;
use shapetopo::synth::{render, ShapeClass};
use shapetopo::vectorize::{amplitude_vector, persistence_image, PersistenceImageConfig};

fn main() -> shapetopo::Result<()> {
    let mask = normalize_mask(&render(ShapeClass::Comb, 100, &mut ChaCha8Rng::seed_from_u64(4)), 125)?;
    let diagrams = mask_diagrams(&mask, &make_directions(8));

    let cfg = PersistenceImageConfig::fit(&diagrams, 50, 10.0)?;
    println!(
        "grid {0}x{0}, births in [{1:.1}, {2:.1}], persistence in [{3:.1}, {4:.1}]",
        cfg.grid_side, cfg.birth_range.0, cfg.birth_range.1, cfg.persistence_range.0, cfg.persistence_range.1
    );
    for pd in &diagrams {
        let pi = persistence_image(pd, &cfg)?;
        let peak = pi.argmax();
        println!(
            "direction {}: {} pairs, mass {:.4}, peak at row {} col {}",
            pd.direction_index,
            pd.len(),
            pi.mass(&cfg),
            peak / cfg.grid_side,
            peak % cfg.grid_side
        );
    }

    let amps = amplitude_vector(&diagrams, 8)?;
    let amps: Vec<String> = amps.iter().map(|a| format!("{a:.2}")).collect();
    println!("amplitudes [{}]", amps.join(", "));
    Ok(())
}
