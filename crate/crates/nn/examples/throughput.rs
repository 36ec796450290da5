use std::time::Instant;

use ipkp_nn::{init_params, softmax_cross_entropy, InitScheme, LayeredModel, Optimizer, OptimizerConfig, Tensor};

fn main() {
    let mut model = LayeredModel::<f32>::lenet5(10);
    init_params(&mut model, &InitScheme::glorot(1)).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::default()).unwrap();
    let b = 32;
    let x = Tensor::from_vec(&[b, 1, 28, 28], (0..b * 784).map(|i| ((i * 7919) % 255) as f32 / 255.0).collect()).unwrap();
    let labels: Vec<usize> = (0..b).map(|i| i % 10).collect();
    let steps: usize = std::env::var("STEPS").ok().and_then(|s| s.parse().ok()).unwrap_or(300);
    let t = Instant::now();
    for _ in 0..steps {
        let acts = model.forward(&x).unwrap();
        let (_, d) = softmax_cross_entropy(acts.logits(), &labels).unwrap();
        let g = model.backward_params(&acts, &d).unwrap();
        opt.step(&mut model, &g).unwrap();
    }
    let s = t.elapsed().as_secs_f64();
    println!("{:.0} train images/s", (steps * b) as f64 / s);
    let t = Instant::now();
    for _ in 0..steps {
        model.logits(&x).unwrap();
    }
    println!("{:.0} eval images/s", (steps * b) as f64 / t.elapsed().as_secs_f64());
}
