//! Train the amplitude network on three noisy Gaussian clusters and print
//! the loss curve.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapetopo::classifier::{init_model, train, FeatureKind, LrSchedule, TrainConfig};

fn main() -> shapetopo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let centers = [[0.0, 0.0, 1.0], [2.0, 0.0, -1.0], [0.0, 2.0, 0.5]];
    let n = 300;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let x = Array2::from_shape_fn((n, 3), |(i, j)| centers[labels[i]][j] + rng.random_range(-0.8..0.8));

    let epochs = 80;
    let cfg = TrainConfig {
        epochs,
        schedule: LrSchedule::reference().compressed(epochs),
        seed: 6,
        ..TrainConfig::default()
    };
    let model = init_model(FeatureKind::Amplitude, 3, 3, cfg.seed);
    println!("{} parameters, initial loss {:.4}", model.parameter_count(), model.loss(x.view(), &labels)?);

    let out = train(model, x.view(), &labels, &cfg)?;
    for (e, l) in out.loss_curve.iter().enumerate().step_by(10) {
        println!("epoch {:3}: lr {:.0e}, loss {l:.4}", e + 1, cfg.schedule.rate(e + 1));
    }
    let (pred, _) = out.model.predict(x.view())?;
    let correct = pred.iter().zip(&labels).filter(|(p, y)| p == y).count();
    println!("training accuracy {:.3}", correct as f64 / n as f64);
    Ok(())
}
