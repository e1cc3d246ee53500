//! Finite-difference scenarios shared by the engine tests and the acceptance suite.

use codemix::nn::layers::Mode;
use codemix::nn::loss::{bce_batch, cce_batch, contrastive_batch, dw_distance, DISTANCE_LAMBDA};
use codemix::nn::{grad_check, l2_penalty, Activation, GradCheckReport, LayerSpec, Network, PairIndex, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    DenseBce,
    Conv1dBce,
    LstmBce,
    GruBce,
    LstmSoftmaxCce,
    TwinDenseContrastive,
    TwinGruContrastive,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::DenseBce,
        Scenario::Conv1dBce,
        Scenario::LstmBce,
        Scenario::GruBce,
        Scenario::LstmSoftmaxCce,
        Scenario::TwinDenseContrastive,
        Scenario::TwinGruContrastive,
    ];
}

fn random_tensor(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

fn sigmoid_head() -> LayerSpec {
    LayerSpec::Dense { units: 1, activation: Activation::Sigmoid }
}

pub fn run(scenario: Scenario, seed: u64) -> GradCheckReport {
    run_with_eps(scenario, seed, FD_EPS)
}

pub fn run_with_eps(scenario: Scenario, seed: u64, eps: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::<f64>::new();
    let batch = 4;
    let (input, specs): (Vec<usize>, Vec<LayerSpec>) = match scenario {
        Scenario::DenseBce => (
            vec![6],
            vec![LayerSpec::Dense { units: 5, activation: Activation::Tanh }, sigmoid_head()],
        ),
        Scenario::Conv1dBce => (
            vec![7, 3],
            vec![
                LayerSpec::Conv1d { filters: 4, kernel: 2, stride: 1, activation: Activation::Tanh },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Conv1d { filters: 3, kernel: 3, stride: 1, activation: Activation::Sigmoid },
                LayerSpec::Flatten,
                sigmoid_head(),
            ],
        ),
        Scenario::LstmBce => (
            vec![5, 3],
            vec![
                LayerSpec::Lstm { units: 4, return_sequences: true },
                LayerSpec::Lstm { units: 3, return_sequences: false },
                sigmoid_head(),
            ],
        ),
        Scenario::GruBce => (
            vec![5, 3],
            vec![
                LayerSpec::Gru { units: 4, return_sequences: true },
                LayerSpec::Gru { units: 3, return_sequences: false },
                sigmoid_head(),
            ],
        ),
        Scenario::LstmSoftmaxCce => (
            vec![4, 5],
            vec![
                LayerSpec::Lstm { units: 6, return_sequences: true },
                LayerSpec::Dense { units: 5, activation: Activation::Softmax },
            ],
        ),
        Scenario::TwinDenseContrastive => (
            vec![6],
            vec![
                LayerSpec::Dense { units: 8, activation: Activation::Tanh },
                LayerSpec::Dropout { rate: 0.1 },
                LayerSpec::Dense { units: 16, activation: Activation::Tanh },
            ],
        ),
        Scenario::TwinGruContrastive => (
            vec![5, 4],
            vec![
                LayerSpec::Gru { units: 4, return_sequences: true },
                LayerSpec::Gru { units: 4, return_sequences: false },
                LayerSpec::Dense { units: 6, activation: Activation::Tanh },
                LayerSpec::Dense { units: 16, activation: Activation::Tanh },
            ],
        ),
    };
    let net = Network::build(&input, &specs, "", &mut store, &mut rng).unwrap();
    // Randomise biases too so every gradient entry is exercised.
    for p in store.params_mut() {
        if !p.decay {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.2..0.2);
            }
        }
    }
    let mut xshape = vec![batch];
    xshape.extend(&input);
    let x = random_tensor(&xshape, 0.5, &mut rng);

    match scenario {
        Scenario::LstmSoftmaxCce => {
            let rows = batch * input[0];
            let targets: Vec<Option<usize>> = (0..rows)
                .map(|r| if r % 7 == 3 { None } else { Some(rng.random_range(0..5)) })
                .collect();
            grad_check(&mut store, eps, |s| {
                let (y, tape) = net.forward(s, &x, Mode::Eval)?;
                let (loss, dy) = cce_batch(&y, &targets)?;
                net.backward(s, tape, dy)?;
                Ok(loss)
            })
            .unwrap()
        }
        Scenario::TwinDenseContrastive | Scenario::TwinGruContrastive => {
            // Label the more distant half of the pairs dissimilar and put the
            // margin clear of every distance so no hinge sits inside the stencil.
            let (emb, _) = net.forward(&store, &x, Mode::Eval).unwrap();
            let mut scored: Vec<(f64, usize, usize)> = (0..batch)
                .flat_map(|a| (a + 1..batch).map(move |b| (a, b)))
                .map(|(a, b)| (dw_distance(emb.row(a), emb.row(b), DISTANCE_LAMBDA).unwrap(), a, b))
                .collect();
            scored.sort_by(|p, q| p.0.total_cmp(&q.0));
            let half = scored.len() / 2;
            let pairs: Vec<PairIndex> = scored
                .iter()
                .enumerate()
                .map(|(i, &(_, a, b))| PairIndex { a, b, y: u8::from(i >= half) })
                .collect();
            let margin = 2.0 * scored.last().unwrap().0;
            grad_check(&mut store, eps, |s| {
                let (emb, tape) = net.forward(s, &x, Mode::Eval)?;
                let (loss, de) = contrastive_batch(&emb, &pairs, margin, DISTANCE_LAMBDA)?;
                net.backward(s, tape, de)?;
                Ok(loss + l2_penalty(s, 1e-2))
            })
            .unwrap()
        }
        _ => {
            let targets: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
            grad_check(&mut store, eps, |s| {
                let (y, tape) = net.forward(s, &x, Mode::Eval)?;
                let (loss, dy) = bce_batch(&y, &targets)?;
                net.backward(s, tape, dy)?;
                Ok(loss)
            })
            .unwrap()
        }
    }
}
