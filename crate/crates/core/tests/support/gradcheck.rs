//! Central finite-difference checks for every tape op, the composite losses
//! and small networks, all at float64.

use drumloop::autodiff::check::{finite_difference, max_relative_error};
use drumloop::autodiff::{Tape, Tensor, Var};
use drumloop::dsp::SpectrogramConfig;
use drumloop::losses::{build_loss, build_loss_with, LossKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-4;
/// Smaller probe for graphs ending in an L1 between spectrograms, whose
/// kinks are dense enough that a 1e-4 step straddles some of them.
pub const FINE_STEP: f64 = 1e-5;

pub struct GradCase {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.error < self.tolerance
    }
}

type Build = dyn Fn(&mut Tape<f64>, &[Var], &[Var]) -> drumloop::Result<Var>;

/// Max relative error between backward and central differences over every
/// element of `params`. `constants` receive no gradient.
pub fn check(params: &[Tensor<f64>], constants: &[Tensor<f64>], build: &Build) -> f64 {
    check_with_step(params, constants, build, STEP)
}

pub fn check_with_step(
    params: &[Tensor<f64>],
    constants: &[Tensor<f64>],
    build: &Build,
    step: f64,
) -> f64 {
    let record = |tape: &mut Tape<f64>, values: &[Tensor<f64>]| {
        let p: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let c: Vec<Var> = constants.iter().map(|t| tape.constant(t.clone())).collect();
        let out = build(tape, &p, &c).expect("graph builds");
        (p, out)
    };

    let mut tape = Tape::new().with_finite_checks(true);
    let (vars, out) = record(&mut tape, params);
    let grads = tape.backward(out).expect("backward");
    let analytic: Vec<f64> = vars
        .iter()
        .zip(params)
        .flat_map(|(v, t)| {
            grads
                .get(*v)
                .map(|g| g.to_f64_vec())
                .unwrap_or_else(|| vec![0.0; t.len()])
        })
        .collect();

    let flat: Vec<f64> = params.iter().flat_map(|t| t.to_f64_vec()).collect();
    let unflatten = |x: &[f64]| {
        let mut offset = 0;
        params
            .iter()
            .map(|t| {
                let part = &x[offset..offset + t.len()];
                offset += t.len();
                Tensor::from_f64(t.shape(), part).unwrap()
            })
            .collect::<Vec<_>>()
    };
    let numeric = finite_difference(
        |x| {
            let mut tape = Tape::new();
            let (_, out) = record(&mut tape, &unflatten(x));
            tape.scalar_value(out)
        },
        &flat,
        step,
    );
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_relative_error(&analytic, &numeric, (1e-6 * scale).max(1e-12))
}

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_f64(shape, &v).unwrap()
}

/// Values bounded away from zero, so kinks stay outside the probe step.
pub fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_f64(shape, &v).unwrap()
}

/// Smooth non-linear reduction to a scalar: `sum(tanh(y) + 2)`, so every
/// element gets a distinct weight and the L1 never reaches its kink.
pub fn reduce(tape: &mut Tape<f64>, y: Var) -> drumloop::Result<Var> {
    let t = tape.tanh(y)?;
    let shape = tape.value(t).shape().to_vec();
    let n: usize = shape.iter().product();
    let floor = tape.constant(Tensor::from_f64(&shape, &vec![-2.0; n])?);
    let mean = tape.l1(t, floor)?;
    tape.scale(mean, n as f64)
}

fn micro_net(tape: &mut Tape<f64>, p: &[Var], c: &[Var]) -> drumloop::Result<Var> {
    let (cond, target) = (c[0], c[1]);
    let h1 = tape.conv1d(cond, p[0], p[1], 2)?;
    let h1 = tape.leaky_relu(h1, 0.2)?;
    let h2 = tape.conv1d(h1, p[2], p[3], 2)?;
    let h2 = tape.leaky_relu(h2, 0.2)?;
    let u2 = tape.upsample_linear(h2)?;
    let m2 = tape.concat_channels(u2, h1)?;
    let h3 = tape.conv1d(m2, p[4], p[5], 1)?;
    let h3 = tape.leaky_relu(h3, 0.2)?;
    let u1 = tape.upsample_linear(h3)?;
    let m1 = tape.concat_channels(u1, cond)?;
    let y = tape.conv1d(m1, p[6], p[7], 1)?;
    let y = tape.tanh(y)?;
    let y = tape.crop_time(y, 2, 28)?;
    let graph = build_loss_with(
        tape,
        y,
        target,
        &[SpectrogramConfig::new(16, 4).unwrap()],
    )?;
    Ok(graph.total)
}

/// Every case of the suite. Extra cases (for instance a whole model) can be
/// appended by the caller.
pub fn op_and_loss_cases() -> Vec<GradCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cases = Vec::new();
    let mut push = |name, error, tolerance| cases.push(GradCase { name, error, tolerance });

    for (name, stride) in [("conv1d stride 1", 1usize), ("conv1d stride 2", 2)] {
        let params = [
            random(&[2, 9], &mut rng),
            random(&[2, 2, 5], &mut rng),
            random(&[2], &mut rng),
        ];
        let e = check(&params, &[], &move |t, p, _| {
            let y = t.conv1d(p[0], p[1], p[2], stride)?;
            reduce(t, y)
        });
        push(name, e, 1e-5);
    }

    let e = check(&[random(&[2, 5], &mut rng)], &[], &|t, p, _| {
        let y = t.upsample_linear(p[0])?;
        reduce(t, y)
    });
    push("upsample_linear", e, 1e-4);

    let e = check(
        &[random(&[2, 6], &mut rng), random(&[1, 6], &mut rng)],
        &[],
        &|t, p, _| {
            let y = t.concat_channels(p[0], p[1])?;
            reduce(t, y)
        },
    );
    push("concat_channels", e, 1e-4);

    let e = check(&[away_from_zero(&[1, 16], &mut rng)], &[], &|t, p, _| {
        let y = t.leaky_relu(p[0], 0.2)?;
        reduce(t, y)
    });
    push("leaky_relu", e, 1e-4);

    let e = check(&[random(&[1, 16], &mut rng)], &[], &|t, p, _| {
        let y = t.tanh(p[0])?;
        let y = t.scale(y, 1.7)?;
        reduce(t, y)
    });
    push("tanh", e, 1e-4);

    let e = check(&[random(&[3, 5], &mut rng)], &[], &|t, p, _| {
        let y = t.softplus(p[0])?;
        reduce(t, y)
    });
    push("softplus", e, 1e-4);

    let e = check(&[random(&[2, 10], &mut rng)], &[], &|t, p, _| {
        let y = t.crop_time(p[0], 3, 5)?;
        reduce(t, y)
    });
    push("crop_time", e, 1e-4);

    let e = check(
        &[random(&[2, 4], &mut rng), random(&[2, 4], &mut rng)],
        &[],
        &|t, p, _| {
            let s = t.add(p[0], p[1])?;
            let s = t.scale(s, -0.6)?;
            reduce(t, s)
        },
    );
    push("add and scale", e, 1e-4);

    let e = check(
        &[away_from_zero(&[1, 12], &mut rng)],
        &[Tensor::zeros(&[1, 12])],
        &|t, p, c| t.l1(p[0], c[0]),
    );
    push("l1", e, 1e-4);

    let e = check(&[random(&[1, 64], &mut rng)], &[], &|t, p, _| {
        let m = t.stft_magnitude(p[0], SpectrogramConfig::new(64, 16).unwrap())?;
        reduce(t, m)
    });
    push("stft_magnitude", e, 1e-4);

    let target = random(&[1, 256], &mut rng);
    for (name, kind) in [
        ("loss recon", LossKind::Recon),
        ("loss wavspec", LossKind::WavSpec),
        ("loss multi", LossKind::Multi),
    ] {
        let e = check_with_step(
            &[random(&[1, 256], &mut rng)],
            std::slice::from_ref(&target),
            &move |t, p, c| Ok(build_loss(t, p[0], c[0], kind)?.total),
            FINE_STEP,
        );
        push(name, e, 1e-4);
    }

    let e = check_with_step(
        &[random(&[1, 256], &mut rng)],
        std::slice::from_ref(&target),
        &|t, p, c| {
            let cfg = SpectrogramConfig::new(64, 16).unwrap();
            Ok(build_loss_with(t, p[0], c[0], &[cfg])?.total)
        },
        FINE_STEP,
    );
    push("loss fft 64 term", e, 1e-4);

    let params = [
        random(&[4, 3, 5], &mut rng),
        random(&[4], &mut rng),
        random(&[6, 4, 5], &mut rng),
        random(&[6], &mut rng),
        random(&[4, 10, 5], &mut rng),
        random(&[4], &mut rng),
        random(&[1, 7, 5], &mut rng),
        random(&[1], &mut rng),
    ];
    let constants = [random(&[3, 32], &mut rng), random(&[1, 28], &mut rng)];
    let e = check(&params, &constants, &micro_net);
    push("four-layer micro-net", e, 1e-3);

    cases
}

/// The real network graph at a micro configuration (2 levels, length 64),
/// differentiated through [`WaveUNet::forward_backward`] with the
/// reconstruction loss.
///
/// [`WaveUNet::forward_backward`]: drumloop::model::WaveUNet::forward_backward
pub fn whole_model_case() -> GradCase {
    use drumloop::model::{ModelVariant, WaveUNet, WaveUNetConfig};

    let config = WaveUNetConfig {
        variant: ModelVariant::Wav,
        channels: vec![4, 6],
        kernel: 5,
        conditioning_channels: 3,
        padded_len: 64,
        nominal_len: 64,
        output_channels: 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a7);
    let mut net = WaveUNet::<f64>::build(config.clone(), 4).unwrap();
    for p in net.params_mut().iter_mut().filter(|p| p.shape().len() == 1) {
        *p = random(p.shape(), &mut rng);
    }
    let cond = random(&[3, 64], &mut rng);
    let target: Vec<f64> = (0..64).map(|_| rng.random_range(-0.5..0.5)).collect();

    let (_, grads) = net.forward_backward(&cond, &target, LossKind::Recon).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.to_f64_vec()).collect();
    let shapes: Vec<Vec<usize>> = net.params().iter().map(|p| p.shape().to_vec()).collect();
    let flat: Vec<f64> = net.params().iter().flat_map(|p| p.to_f64_vec()).collect();
    let numeric = finite_difference(
        |x| {
            let mut offset = 0;
            let params = shapes
                .iter()
                .map(|s| {
                    let n: usize = s.iter().product();
                    offset += n;
                    Tensor::from_f64(s, &x[offset - n..offset]).unwrap()
                })
                .collect();
            let probe = WaveUNet::from_params(config.clone(), params).unwrap();
            probe.forward_backward(&cond, &target, LossKind::Recon).unwrap().0.total
        },
        &flat,
        FINE_STEP,
    );
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    GradCase {
        name: "WaveUNet micro-config",
        error: max_relative_error(&analytic, &numeric, (1e-6 * scale).max(1e-12)),
        tolerance: 1e-3,
    }
}
