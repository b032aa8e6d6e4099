//! Built-in experiments: the three stochastic testbeds, the learned-reward
//! study, and regret-bound checks on adversarial losses.

use std::path::PathBuf;

use choicebandit_core::envs::{AdversarialKind, EnvFamily};
use choicebandit_core::GnlModel;

use crate::config::{Algorithm, EnvSpec, ExperimentConfig, Format, VariantSpec, DEFAULT_ALPHA};

const SEED: u64 = 20_240_617;

fn gb(name: &str, algorithm: Algorithm, model: GnlModel) -> VariantSpec {
    VariantSpec {
        name: name.into(),
        algorithm,
        model,
    }
}

fn mnl_gb(n: usize) -> VariantSpec {
    gb(
        "MNL",
        Algorithm::ClassicalSoftmax {
            alpha: Some(DEFAULT_ALPHA),
        },
        GnlModel::mnl(n, 1.0).expect("valid MNL"),
    )
}

fn nl_gb(name: &str, partition: &[Vec<usize>], mu_ell: &[f64]) -> VariantSpec {
    gb(
        name,
        Algorithm::NestedLogitClosedForm {
            alpha: Some(DEFAULT_ALPHA),
        },
        GnlModel::nested_logit(partition, mu_ell).expect("valid NL"),
    )
}

fn config(name: &str, env: EnvSpec, variants: Vec<VariantSpec>, steps: usize, replications: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        env,
        variants,
        steps,
        replications,
        seed: SEED,
        out: PathBuf::from("out").join(name),
        formats: vec![Format::Csv, Format::Svg],
    }
}

/// `{0..a}, {a..b}, ...` as index lists.
fn blocks(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let b = (start..start + s).collect();
            start += s;
            b
        })
        .collect()
}

pub fn e1() -> ExperimentConfig {
    let pairs: Vec<Vec<usize>> = (0..5).map(|i| vec![2 * i, 2 * i + 1]).collect();
    config(
        "e1-mnl-env",
        EnvSpec::Stochastic(EnvFamily::MnlEnv),
        vec![
            mnl_gb(10),
            nl_gb("NL-trivial", &blocks(&[10]), &[1.0]),
            nl_gb("NL1", &pairs, &[0.8; 5]),
            nl_gb("NL2", &blocks(&[2, 3, 2, 3]), &[0.3, 0.45, 0.3, 0.45]),
        ],
        1000,
        2000,
    )
}

/// One strong arm (0, 1, 2) with two weak arms in each nest.
pub fn nl_env_partition() -> Vec<Vec<usize>> {
    vec![vec![0, 3, 4], vec![1, 5, 6], vec![2, 7, 8]]
}

pub fn e2() -> ExperimentConfig {
    let p = nl_env_partition();
    config(
        "e2-nl-env",
        EnvSpec::Stochastic(EnvFamily::NlEnv),
        vec![
            mnl_gb(9),
            nl_gb("NL1", &p, &[0.25; 3]),
            nl_gb("NL2", &p, &[0.7; 3]),
            nl_gb("NL3", &p, &[0.45; 3]),
        ],
        1000,
        2000,
    )
}

pub fn e3(steps: usize) -> ExperimentConfig {
    config(
        &format!("e3-learned-{steps}"),
        EnvSpec::Stochastic(EnvFamily::NlEnv),
        vec![mnl_gb(9), nl_gb("NL3", &nl_env_partition(), &[0.45; 3])],
        steps,
        1,
    )
}

pub fn e4() -> ExperimentConfig {
    let p = blocks(&[5, 10, 10]);
    config(
        "e4-nl-large",
        EnvSpec::Stochastic(EnvFamily::NlLargeEnv),
        vec![
            mnl_gb(25),
            nl_gb("NL1", &p, &[0.95, 0.35, 0.35]),
            nl_gb("NL2", &p, &[0.95, 0.25, 0.25]),
            nl_gb("NL3", &p, &[0.65, 0.2, 0.2]),
        ],
        1000,
        2000,
    )
}

pub fn experts_bound() -> ExperimentConfig {
    let experts = |name: &str, model: GnlModel| gb(name, Algorithm::Experts { eta: None }, model);
    let pairs: Vec<Vec<usize>> = (0..5).map(|i| vec![2 * i, 2 * i + 1]).collect();
    config(
        "experts-bound",
        EnvSpec::Adversarial {
            adversarial: AdversarialKind::UniformRandom,
            n: 10,
        },
        vec![
            experts("MNL", GnlModel::mnl(10, 1.0).expect("valid MNL")),
            experts("NL-halves", GnlModel::nested_logit(&blocks(&[5, 5]), &[0.5, 0.5]).expect("valid NL")),
            experts(
                "NL-pairs",
                GnlModel::nested_logit(&pairs, &[0.3, 0.8, 0.3, 0.8, 0.3]).expect("valid NL"),
            ),
        ],
        2000,
        100,
    )
}

pub fn adversarial_bound(kind: AdversarialKind) -> ExperimentConfig {
    let suffix = match kind {
        AdversarialKind::UniformRandom => "uniform",
        AdversarialKind::SingleBestArm { .. } => "single-best",
        AdversarialKind::SwitchingBest { .. } => "switching",
    };
    let bandit = |name: &str, model: GnlModel| gb(name, Algorithm::AdvBandit { eta: None }, model);
    config(
        &format!("adv-bound-{suffix}"),
        EnvSpec::Adversarial { adversarial: kind, n: 5 },
        vec![
            bandit("MNL", GnlModel::mnl(5, 1.0).expect("valid MNL")),
            bandit("NL", GnlModel::nested_logit(&blocks(&[2, 3]), &[0.5, 0.8]).expect("valid NL")),
        ],
        1000,
        500,
    )
}

/// Every built-in experiment, in listing order.
pub fn preset_experiments() -> Vec<ExperimentConfig> {
    vec![
        e1(),
        e2(),
        e3(1000),
        e3(2000),
        e4(),
        experts_bound(),
        adversarial_bound(AdversarialKind::UniformRandom),
        adversarial_bound(AdversarialKind::SingleBestArm { best: 2 }),
        adversarial_bound(AdversarialKind::SwitchingBest { period: 100 }),
    ]
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    preset_experiments().into_iter().find(|c| c.name == name)
}
