use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sigmoid, Matrix};
use crate::rng;

use super::dataset::{fit_standardizer, standardize, Dataset, DatasetManifest, Split};
use super::effects::{compute_marginal_effects, DEFAULT_MC_SAMPLES, DEFAULT_STEP};
use super::spec::{standard_normal, Distribution, FeatureSpec, StructuralModel};
use super::{FlipBand, Generated, GroundTruth};

pub const LOAN_INTERCEPT: f64 = 2.5;

/// Linear index weights of the loan-approval process, on standardized
/// features.
pub const LOAN_COEFFICIENTS: [(&str, f64); 10] = [
    ("Age", 0.0005),
    ("Sex", 0.0),
    ("Married", 0.1),
    ("Cosigner", 0.25),
    ("CreditHistory", 1.5),
    ("Income", 3.0),
    ("Utilization", -1.0),
    ("Delinquencies", -0.75),
    ("Inquiries", -0.5),
    ("CreditScore", 5.0),
];

/// Label noise sd: variance 1/4.
const LOAN_NOISE_SD: f64 = 0.5;
/// Cosigner logit noise sd: variance 1/2.
const COSIGNER_NOISE_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Years of credit history.
const CREDIT_HISTORY: Distribution = Distribution::Uniform { low: 0.0, high: 30.0 };

/// The linear label rule applied to standardized columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub intercept: f64,
    /// `(column, weight)`; columns not listed get weight 0.
    pub coefficients: Vec<(String, f64)>,
    pub noise_sd: f64,
    pub flip_band: Option<FlipBand>,
}

impl LabelRule {
    fn new(intercept: f64, coefficients: &[(&str, f64)], noise_sd: f64) -> Self {
        LabelRule {
            intercept,
            coefficients: coefficients.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
            noise_sd,
            flip_band: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CorrelatedAgeScore,
    ObservedConfounder,
    UnobservedConfounder,
    Instability2d,
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlated-age-score" => Ok(ScenarioKind::CorrelatedAgeScore),
            "observed-confounder" => Ok(ScenarioKind::ObservedConfounder),
            "unobserved-confounder" => Ok(ScenarioKind::UnobservedConfounder),
            "instability-2d" => Ok(ScenarioKind::Instability2d),
            other => Err(Error::config("scenario", format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::CorrelatedAgeScore => "correlated-age-score",
            ScenarioKind::ObservedConfounder => "observed-confounder",
            ScenarioKind::UnobservedConfounder => "unobserved-confounder",
            ScenarioKind::Instability2d => "instability-2d",
        })
    }
}

/// Named generator, as used on the command line and in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorId {
    LoanCorrelated,
    LoanIndependent,
    Marketing { independent: bool },
    RandomLinear { d: usize },
    Scenario(ScenarioKind),
}

impl fmt::Display for GeneratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorId::LoanCorrelated => f.write_str("loan-correlated"),
            GeneratorId::LoanIndependent => f.write_str("loan-independent"),
            GeneratorId::Marketing { independent: false } => f.write_str("marketing"),
            GeneratorId::Marketing { independent: true } => f.write_str("marketing-independent"),
            GeneratorId::RandomLinear { d } => write!(f, "random-linear-{d}"),
            GeneratorId::Scenario(k) => write!(f, "scenario-{k}"),
        }
    }
}

impl FromStr for GeneratorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loan-correlated" => Ok(GeneratorId::LoanCorrelated),
            "loan-independent" => Ok(GeneratorId::LoanIndependent),
            "marketing" => Ok(GeneratorId::Marketing { independent: false }),
            "marketing-independent" => Ok(GeneratorId::Marketing { independent: true }),
            _ => {
                if let Some(d) = s.strip_prefix("random-linear-") {
                    let d = d
                        .parse()
                        .map_err(|_| Error::config("generator", format!("bad dimension in `{s}`")))?;
                    Ok(GeneratorId::RandomLinear { d })
                } else if let Some(k) = s.strip_prefix("scenario-") {
                    Ok(GeneratorId::Scenario(k.parse()?))
                } else {
                    Err(Error::config("generator", format!("unknown generator `{s}`")))
                }
            }
        }
    }
}

pub fn generate(id: GeneratorId, n_rows: usize, seed: u64) -> Result<Generated> {
    match id {
        GeneratorId::LoanCorrelated => gen_loan_correlated(n_rows, seed),
        GeneratorId::LoanIndependent => gen_loan_independent(n_rows, seed),
        GeneratorId::Marketing { independent } => gen_marketing(n_rows, seed, independent),
        GeneratorId::RandomLinear { d } => gen_random_linear(d, n_rows, seed),
        GeneratorId::Scenario(kind) => gen_scenario(kind, n_rows, seed),
    }
}

fn check_rows(n_rows: usize) -> Result<()> {
    if n_rows == 0 {
        return Err(Error::config("n_rows", "must be at least 1"));
    }
    Ok(())
}

/// Sample, split, standardize, label and attach marginal effects.
pub(crate) fn build(
    generator: String,
    features: Vec<FeatureSpec>,
    rule: LabelRule,
    n_rows: usize,
    seed: u64,
    notes: Vec<String>,
) -> Result<Generated> {
    check_rows(n_rows)?;
    let structure = StructuralModel::new(features)?;
    let n_cols = structure.n_columns();

    let mut coefficients = vec![0.0; n_cols];
    for (name, w) in &rule.coefficients {
        let j = structure
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::config("coefficients", format!("unknown column `{name}`")))?;
        coefficients[j] = *w;
    }

    let mut features_rng = rng::stream(seed, "features", 0);
    let mut structural_rng = rng::stream(seed, "structural", 0);
    let mut data = Vec::with_capacity(n_rows * n_cols);
    for _ in 0..n_rows {
        data.extend(structure.sample_row(&mut features_rng, &mut structural_rng));
    }
    let raw = Matrix::from_vec(n_rows, n_cols, data)?;

    let split = Split::random(n_rows, super::DEFAULT_TEST_FRACTION, seed);
    let (means, sds) = fit_standardizer(&raw, &split.train);

    let mut truth = GroundTruth {
        generator: generator.clone(),
        structure,
        intercept: rule.intercept,
        coefficients,
        noise_sd: rule.noise_sd,
        flip_band: rule.flip_band,
        means,
        sds,
        beta: Vec::new(),
        beta_se: Vec::new(),
    };
    let y = labels_from_raw(&truth, &raw, seed);

    let me = compute_marginal_effects(
        &truth,
        DEFAULT_MC_SAMPLES,
        DEFAULT_STEP,
        rng::derive_seed(seed, "marginal-effects", 0),
    )?;
    truth.beta = me.beta;
    truth.beta_se = me.se;

    let observed = truth.structure.observed_columns();
    let obs_idx: Vec<usize> = (0..n_cols).filter(|&j| observed[j]).collect();
    let z = standardize(&raw, &truth.means, &truth.sds);
    let mut x = Matrix::zeros(n_rows, obs_idx.len());
    for i in 0..n_rows {
        for (k, &j) in obs_idx.iter().enumerate() {
            x.set(i, k, z.get(i, j));
        }
    }
    let mut all_notes = vec!["one-hot columns ordered alphabetically by level name".to_string()];
    all_notes.extend(notes);
    let dataset = Dataset {
        feature_names: obs_idx.iter().map(|&j| truth.structure.columns[j].clone()).collect(),
        x,
        y,
        feature_means: obs_idx.iter().map(|&j| truth.means[j]).collect(),
        feature_sds: obs_idx.iter().map(|&j| truth.sds[j]).collect(),
        split,
        manifest: DatasetManifest {
            generator,
            seed,
            n_rows,
            notes: all_notes,
        },
    };
    Ok(Generated { dataset, truth, raw })
}

/// Labels from raw values (all columns) and the label-noise streams of
/// `seed`. Generation itself goes through this function, so recomputing
/// labels from stored raw values reproduces them exactly.
pub fn labels_from_raw(truth: &GroundTruth, raw: &Matrix, seed: u64) -> Vec<u8> {
    let mut noise_rng = rng::stream(seed, "label-noise", 0);
    let mut flip_rng = rng::stream(seed, "label-flips", 0);
    let mut z = vec![0.0; raw.cols()];
    raw.iter_rows()
        .map(|row| {
            for (j, v) in row.iter().enumerate() {
                z[j] = (v - truth.means[j]) / truth.sds[j];
            }
            let clean = truth.clean_index(&z);
            let eps = truth.noise_sd * standard_normal(&mut noise_rng);
            let mut y = u8::from(sigmoid(clean + eps) >= 0.5);
            let u: f64 = flip_rng.random();
            if let Some(band) = truth.flip_band {
                if clean.abs() < band.half_width && u < band.flip_prob {
                    y = 1 - y;
                }
            }
            y
        })
        .collect()
}

fn loan_demographics() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::continuous("Age", Distribution::Uniform { low: 18.0, high: 100.0 }),
        FeatureSpec::binary("Sex", 0.5),
        FeatureSpec::binary("Married", 0.5),
    ]
}

fn loan_credit_inputs() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::continuous("CreditHistory", CREDIT_HISTORY),
        FeatureSpec::continuous(
            "Income",
            Distribution::Normal {
                mean: 40_000.0,
                sd: 30_000.0,
            },
        ),
        FeatureSpec::continuous("Utilization", Distribution::Uniform { low: 0.0, high: 1.0 }),
        FeatureSpec::continuous("Delinquencies", Distribution::Uniform { low: 0.0, high: 24.0 }),
        FeatureSpec::continuous("Inquiries", Distribution::Uniform { low: 0.0, high: 6.0 }),
    ]
}

/// Partial FICO score:
/// `650 + (10 + 2.5·History) + (70 − 15·Inquiries) + (35 − 4·Delinquencies)
///  + (105 − 100·Utilization)`.
fn credit_score_equation() -> FeatureSpec {
    FeatureSpec::affine(
        "CreditScore",
        650.0 + 10.0 + 70.0 + 35.0 + 105.0,
        &[
            ("CreditHistory", 2.5),
            ("Inquiries", -15.0),
            ("Delinquencies", -4.0),
            ("Utilization", -100.0),
        ],
        0.0,
    )
}

fn uniform_moments(d: &Distribution) -> (f64, f64) {
    match d {
        Distribution::Uniform { low, high } => ((low + high) / 2.0, (high - low).powi(2) / 12.0),
        _ => unreachable!("uniform only"),
    }
}

/// Mean and sd of the partial FICO score under independent uniform inputs.
fn credit_score_moments() -> (f64, f64) {
    let (h_m, h_v) = uniform_moments(&CREDIT_HISTORY);
    let (i_m, i_v) = uniform_moments(&Distribution::Uniform { low: 0.0, high: 6.0 });
    let (d_m, d_v) = uniform_moments(&Distribution::Uniform { low: 0.0, high: 24.0 });
    let (u_m, u_v) = uniform_moments(&Distribution::Uniform { low: 0.0, high: 1.0 });
    let mean = 870.0 + 2.5 * h_m - 15.0 * i_m - 4.0 * d_m - 100.0 * u_m;
    let var = 6.25 * h_v + 225.0 * i_v + 16.0 * d_v + 10_000.0 * u_v;
    (mean, var.sqrt())
}

fn loan_rule() -> LabelRule {
    LabelRule::new(LOAN_INTERCEPT, &LOAN_COEFFICIENTS, LOAN_NOISE_SD)
}

/// Loan approval data: Credit Score follows the partial FICO model and
/// Cosigner depends on Married.
pub fn gen_loan_correlated(n_rows: usize, seed: u64) -> Result<Generated> {
    let mut f = loan_demographics();
    f.push(FeatureSpec::bernoulli_logit(
        "Cosigner",
        1.0,
        &[("Married", 2.0)],
        COSIGNER_NOISE_SD,
    ));
    f.extend(loan_credit_inputs());
    f.push(credit_score_equation());
    build(
        "loan-correlated".into(),
        f,
        loan_rule(),
        n_rows,
        seed,
        vec!["classification threshold 0.5 on predicted probability".into()],
    )
}

/// Loan approval data with mutually independent features. Credit Score
/// keeps the mean and sd of the FICO composite and Cosigner keeps its
/// marginal rate, but both are drawn exogenously.
pub fn gen_loan_independent(n_rows: usize, seed: u64) -> Result<Generated> {
    let (cs_mean, cs_sd) = credit_score_moments();
    let p_cosigner =
        0.5 * (super::expected_sigmoid(1.0, COSIGNER_NOISE_SD) + super::expected_sigmoid(3.0, COSIGNER_NOISE_SD));
    let mut f = loan_demographics();
    f.push(FeatureSpec::binary("Cosigner", p_cosigner));
    f.extend(loan_credit_inputs());
    f.push(FeatureSpec::continuous(
        "CreditScore",
        Distribution::Normal {
            mean: cs_mean,
            sd: cs_sd,
        },
    ));
    build(
        "loan-independent".into(),
        f,
        loan_rule(),
        n_rows,
        seed,
        vec!["classification threshold 0.5 on predicted probability".into()],
    )
}

const MARKETING_INTERCEPT: f64 = 0.5;
const MARKETING_COEFFICIENTS: [(&str, f64); 16] = [
    ("Age", 0.3),
    ("Sex", 0.0),
    ("Married", 0.2),
    ("PreviousPurchase", 1.5),
    ("WebsiteVisits", 2.0),
    ("Subscribed", 1.0),
    ("OfferValue", 2.5),
    ("Education_College", 0.4),
    ("Education_Graduate", 0.8),
    ("Education_HighSchool", -0.6),
    ("OfferType_BOGO", 1.2),
    ("OfferType_Discount", 0.5),
    ("OfferType_FreeShipping", -0.4),
    ("Mode_Email", -0.7),
    ("Mode_SMS", 0.1),
    ("Mode_SocialMedia", 0.9),
];

/// Direct-marketing response data: 10 logical features, three of them
/// categorical, expanding to 16 columns. Offer Value depends on
/// subscription status unless `independent`.
pub fn gen_marketing(n_rows: usize, seed: u64, independent: bool) -> Result<Generated> {
    let offer_value = if independent {
        FeatureSpec::continuous("OfferValue", Distribution::Uniform { low: 5.0, high: 50.0 })
    } else {
        FeatureSpec::affine("OfferValue", 15.0, &[("Subscribed", 20.0)], 5.0)
    };
    let f = vec![
        FeatureSpec::continuous("Age", Distribution::Uniform { low: 18.0, high: 100.0 }),
        FeatureSpec::binary("Sex", 0.5),
        FeatureSpec::binary("Married", 0.5),
        FeatureSpec::binary("PreviousPurchase", 0.5),
        FeatureSpec::continuous("WebsiteVisits", Distribution::Uniform { low: 0.0, high: 50.0 }),
        FeatureSpec::binary("Subscribed", 0.5),
        offer_value,
        FeatureSpec::categorical("Education", &["HighSchool", "College", "Graduate"]),
        FeatureSpec::categorical("OfferType", &["Discount", "BOGO", "FreeShipping"]),
        FeatureSpec::categorical("Mode", &["Email", "SMS", "SocialMedia"]),
    ];
    let name = if independent {
        "marketing-independent"
    } else {
        "marketing"
    };
    build(
        name.into(),
        f,
        LabelRule::new(MARKETING_INTERCEPT, &MARKETING_COEFFICIENTS, 0.5),
        n_rows,
        seed,
        Vec::new(),
    )
}

/// `d` i.i.d. N(0, 5) features, integer coefficients uniform on
/// [−10, 10] (never all zero), noiseless labels through the origin.
pub fn gen_random_linear(d: usize, n_rows: usize, seed: u64) -> Result<Generated> {
    if !(3..=100).contains(&d) {
        return Err(Error::config("d", "must be between 3 and 100"));
    }
    let mut coef_rng = rng::stream(seed, "coefficients", 0);
    let coefs: Vec<f64> = loop {
        let c: Vec<f64> = (0..d).map(|_| f64::from(coef_rng.random_range(-10i32..=10))).collect();
        if c.iter().any(|&v| v != 0.0) {
            break c;
        }
    };
    let names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    let features = names
        .iter()
        .map(|n| {
            FeatureSpec::continuous(
                n,
                Distribution::Normal {
                    mean: 0.0,
                    sd: 5f64.sqrt(),
                },
            )
        })
        .collect();
    let rule = LabelRule {
        intercept: 0.0,
        coefficients: names.iter().cloned().zip(coefs).collect(),
        noise_sd: 0.0,
        flip_band: None,
    };
    build(format!("random-linear-{d}"), features, rule, n_rows, seed, Vec::new())
}

/// Scenario variants built from a reduced set of loan features, reusing
/// the loan weights for every feature they keep.
pub fn gen_scenario(kind: ScenarioKind, n_rows: usize, seed: u64) -> Result<Generated> {
    let age = || FeatureSpec::continuous("Age", Distribution::Uniform { low: 18.0, high: 100.0 });
    let income = || {
        FeatureSpec::continuous(
            "Income",
            Distribution::Normal {
                mean: 40_000.0,
                sd: 30_000.0,
            },
        )
    };
    let utilization = || FeatureSpec::continuous("Utilization", Distribution::Uniform { low: 0.0, high: 1.0 });
    let name = format!("scenario-{kind}");
    match kind {
        ScenarioKind::CorrelatedAgeScore => {
            let f = vec![
                age(),
                income(),
                utilization(),
                FeatureSpec::affine("CreditScore", 300.0, &[("Age", 5.0)], 20.0),
            ];
            let rule = LabelRule::new(
                LOAN_INTERCEPT,
                &[
                    ("Age", 0.0005),
                    ("Income", 3.0),
                    ("Utilization", -1.0),
                    ("CreditScore", 5.0),
                ],
                LOAN_NOISE_SD,
            );
            build(name, f, rule, n_rows, seed, Vec::new())
        }
        ScenarioKind::ObservedConfounder => {
            let f = vec![
                age(),
                income(),
                utilization(),
                FeatureSpec::continuous("Inquiries", Distribution::Uniform { low: 0.0, high: 6.0 }),
                FeatureSpec::affine(
                    "CreditScore",
                    650.0 + 70.0 + 105.0,
                    &[("Inquiries", -15.0), ("Utilization", -100.0)],
                    10.0,
                ),
            ];
            let rule = LabelRule::new(
                LOAN_INTERCEPT,
                &[
                    ("Age", 0.0005),
                    ("Income", 3.0),
                    ("Utilization", -1.0),
                    ("Inquiries", -0.5),
                    ("CreditScore", 0.0),
                ],
                LOAN_NOISE_SD,
            );
            build(name, f, rule, n_rows, seed, Vec::new())
        }
        ScenarioKind::UnobservedConfounder => {
            let f = vec![
                age(),
                FeatureSpec::continuous("SocialSupport", Distribution::Uniform { low: 0.0, high: 10.0 }).hidden(),
                FeatureSpec::affine("Income", 70_000.0, &[("SocialSupport", -6_000.0)], 25_000.0),
                utilization(),
            ];
            let rule = LabelRule::new(
                LOAN_INTERCEPT,
                &[
                    ("Age", 0.0005),
                    ("SocialSupport", 2.0),
                    ("Income", 3.0),
                    ("Utilization", -1.0),
                ],
                LOAN_NOISE_SD,
            );
            build(
                name,
                f,
                rule,
                n_rows,
                seed,
                vec!["SocialSupport is unobserved: present in labels, absent from X".into()],
            )
        }
        ScenarioKind::Instability2d => {
            let f = vec![income(), utilization()];
            let mut rule = LabelRule::new(0.0, &[("Income", 3.0), ("Utilization", -1.0)], 0.0);
            rule.flip_band = Some(FlipBand {
                half_width: 0.5,
                flip_prob: 0.5,
            });
            build(name, f, rule, n_rows, seed, Vec::new())
        }
    }
}
