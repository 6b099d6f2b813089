//! Search genome: one level mask per classifier input plus QAT genes.
//!
//! Fitness digitizes every feature through its pruned ADC, trains a pow2
//! MLP on the result and scores (accuracy miss, front-end area). Area is a
//! function of the masks alone.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::{LevelMask, PrunedAdc, DEFAULT_BITWIDTH};
use crate::area::{estimate_area, AreaEstimate, GateCostTable};
use crate::data::{stratified_split, Dataset, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::nsga2::{Evaluation, Problem};
use crate::qmlp::{self, Optimizer, QuantConfig, QuantMlp, QuantizedSet, TrainSpec};

/// Share of the training split held out when fitness uses a validation set.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Precision and tuning genes of the QAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QatGenes {
    pub weight_bits: u32,
    pub activation_bits: u32,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for QatGenes {
    fn default() -> Self {
        Self { weight_bits: 8, activation_bits: 8, batch_size: 16, epochs: 50 }
    }
}

/// Allowed values of each QAT gene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneDomains {
    pub weight_bits: Vec<u32>,
    pub activation_bits: Vec<u32>,
    pub batch_size: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for GeneDomains {
    fn default() -> Self {
        Self {
            weight_bits: (4..=8).collect(),
            activation_bits: (4..=8).collect(),
            batch_size: vec![8, 16, 32, 64],
            epochs: (1..=10).map(|k| 10 * k).collect(),
        }
    }
}

impl GeneDomains {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("gene domain {what}")));
        if self.weight_bits.is_empty() || self.weight_bits.iter().any(|b| !(2..=8).contains(b)) {
            return bad("weight_bits must be non-empty within 2..=8");
        }
        if self.activation_bits.is_empty() || self.activation_bits.iter().any(|b| !(2..=8).contains(b)) {
            return bad("activation_bits must be non-empty within 2..=8");
        }
        if self.batch_size.is_empty() || self.batch_size.contains(&0) {
            return bad("batch_size must be non-empty and positive");
        }
        if self.epochs.is_empty() {
            return bad("epochs must be non-empty");
        }
        Ok(())
    }

    pub fn contains(&self, g: &QatGenes) -> bool {
        self.weight_bits.contains(&g.weight_bits)
            && self.activation_bits.contains(&g.activation_bits)
            && self.batch_size.contains(&g.batch_size)
            && self.epochs.contains(&g.epochs)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> QatGenes {
        QatGenes {
            weight_bits: pick(&self.weight_bits, rng),
            activation_bits: pick(&self.activation_bits, rng),
            batch_size: pick(&self.batch_size, rng),
            epochs: pick(&self.epochs, rng),
        }
    }
}

fn pick<T: Copy>(values: &[T], rng: &mut ChaCha8Rng) -> T {
    values[rng.random_range(0..values.len())]
}

/// Variation operator rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationRates {
    /// Per mask-bit flip probability; `None` means `1 / (2^N - 1)`.
    pub mask_bit_rate: Option<f64>,
    /// Probability that a QAT gene is re-sampled from its domain.
    pub gene_rate: f64,
    /// Per-locus swap probability of uniform crossover.
    pub swap_prob: f64,
}

impl Default for VariationRates {
    fn default() -> Self {
        Self { mask_bit_rate: None, gene_rate: 0.1, swap_prob: 0.5 }
    }
}

impl VariationRates {
    pub fn validate(&self) -> Result<()> {
        let probs = [("mask_bit_rate", self.mask_bit_rate.unwrap_or(0.0)), ("gene_rate", self.gene_rate), ("swap_prob", self.swap_prob)];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn bit_rate(&self, bitwidth: u32) -> f64 {
        self.mask_bit_rate.unwrap_or(1.0 / LevelMask::level_count(bitwidth) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub masks: Vec<LevelMask>,
    pub genes: QatGenes,
}

/// Wire form: `{masks: [hex, ...], weight_bits, activation_bits, batch_size, epochs}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChromosomeJson {
    pub masks: Vec<String>,
    pub weight_bits: u32,
    pub activation_bits: u32,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Chromosome {
    /// Conventional ADC on every input with the given genes.
    pub fn baseline(features: usize, bitwidth: u32, genes: QatGenes) -> Result<Self> {
        Ok(Self { masks: vec![LevelMask::full(bitwidth)?; features], genes })
    }

    pub fn bitwidth(&self) -> Option<u32> {
        self.masks.first().map(LevelMask::bitwidth)
    }

    pub fn adcs(&self) -> Vec<PrunedAdc> {
        self.masks.iter().map(|&m| PrunedAdc::new(m)).collect()
    }

    pub fn masks_hex(&self) -> Vec<String> {
        self.masks.iter().map(LevelMask::to_hex).collect()
    }

    pub fn to_json(&self) -> ChromosomeJson {
        ChromosomeJson {
            masks: self.masks_hex(),
            weight_bits: self.genes.weight_bits,
            activation_bits: self.genes.activation_bits,
            batch_size: self.genes.batch_size,
            epochs: self.genes.epochs,
        }
    }

    pub fn from_json(json: &ChromosomeJson, bitwidth: u32) -> Result<Self> {
        let masks = json.masks.iter().map(|h| LevelMask::from_hex(bitwidth, h)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            masks,
            genes: QatGenes {
                weight_bits: json.weight_bits,
                activation_bits: json.activation_bits,
                batch_size: json.batch_size,
                epochs: json.epochs,
            },
        })
    }

    /// Builds the ADC bank, quantizer and training spec for this genome.
    pub fn decode(&self, features: usize, settings: &SearchSettings, seed: u64) -> Result<(Vec<PrunedAdc>, QuantConfig, TrainSpec)> {
        if self.masks.len() != features {
            return Err(Error::ShapeMismatch(format!("{} masks for {features} features", self.masks.len())));
        }
        if let Some(m) = self.masks.iter().find(|m| m.bitwidth() != settings.bitwidth) {
            return Err(Error::ShapeMismatch(format!("{}-bit mask in a {}-bit search", m.bitwidth(), settings.bitwidth)));
        }
        if !settings.domains.contains(&self.genes) {
            return Err(Error::InvalidConfig(format!("genes {:?} outside their domains", self.genes)));
        }
        let cfg = QuantConfig {
            weight_bits: self.genes.weight_bits,
            activation_bits: self.genes.activation_bits,
            input_bits: settings.bitwidth,
        };
        cfg.validate()?;
        let spec = TrainSpec {
            batch_size: self.genes.batch_size,
            epochs: self.genes.epochs,
            learning_rate: settings.learning_rate,
            seed,
            optimizer: settings.optimizer,
        };
        Ok((self.adcs(), cfg, spec))
    }
}

/// Uniform crossover: whole masks swap per feature, genes swap one by one.
pub fn crossover(a: &Chromosome, b: &Chromosome, swap_prob: f64, rng: &mut ChaCha8Rng) -> (Chromosome, Chromosome) {
    let (mut c1, mut c2) = (a.clone(), b.clone());
    for (m1, m2) in c1.masks.iter_mut().zip(c2.masks.iter_mut()) {
        if rng.random_bool(swap_prob) {
            std::mem::swap(m1, m2);
        }
    }
    let (g1, g2) = (&mut c1.genes, &mut c2.genes);
    if rng.random_bool(swap_prob) {
        std::mem::swap(&mut g1.weight_bits, &mut g2.weight_bits);
    }
    if rng.random_bool(swap_prob) {
        std::mem::swap(&mut g1.activation_bits, &mut g2.activation_bits);
    }
    if rng.random_bool(swap_prob) {
        std::mem::swap(&mut g1.batch_size, &mut g2.batch_size);
    }
    if rng.random_bool(swap_prob) {
        std::mem::swap(&mut g1.epochs, &mut g2.epochs);
    }
    (c1, c2)
}

/// Flips each mask bit with `bit_rate` and re-samples each gene with `gene_rate`.
pub fn mutate(ch: &Chromosome, bit_rate: f64, gene_rate: f64, domains: &GeneDomains, rng: &mut ChaCha8Rng) -> Chromosome {
    let mut out = ch.clone();
    for mask in &mut out.masks {
        let mut bits = mask.bits();
        for k in 0..mask.len() {
            if rng.random_bool(bit_rate) {
                bits ^= 1 << k;
            }
        }
        *mask = LevelMask::from_bits(mask.bitwidth(), bits).expect("flips stay within the mask width");
    }
    let g = &mut out.genes;
    if rng.random_bool(gene_rate) {
        g.weight_bits = pick(&domains.weight_bits, rng);
    }
    if rng.random_bool(gene_rate) {
        g.activation_bits = pick(&domains.activation_bits, rng);
    }
    if rng.random_bool(gene_rate) {
        g.batch_size = pick(&domains.batch_size, rng);
    }
    if rng.random_bool(gene_rate) {
        g.epochs = pick(&domains.epochs, rng);
    }
    out
}

/// Random masks whose keep-probability is one density drawn from U[0.2, 1].
pub fn random_chromosome(features: usize, bitwidth: u32, domains: &GeneDomains, rng: &mut ChaCha8Rng) -> Result<Chromosome> {
    let density: f64 = rng.random_range(0.2..=1.0);
    let masks = (0..features)
        .map(|_| {
            let bools: Vec<bool> = (0..LevelMask::level_count(bitwidth)).map(|_| rng.random_bool(density)).collect();
            LevelMask::from_bools(bitwidth, &bools)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Chromosome { masks, genes: domains.sample(rng) })
}

/// Individual 0 is the conventional baseline; the rest are random.
pub fn seed_population(
    size: usize,
    features: usize,
    bitwidth: u32,
    baseline: QatGenes,
    domains: &GeneDomains,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Chromosome>> {
    if size < 4 {
        return Err(Error::InvalidConfig(format!("population size {size} below 4")));
    }
    let mut pop = vec![Chromosome::baseline(features, bitwidth, baseline)?];
    for _ in 1..size {
        pop.push(random_chromosome(features, bitwidth, domains, rng)?);
    }
    Ok(pop)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessSplit {
    /// Fitness on the held-out test split (reported accuracy).
    #[default]
    Test,
    /// Fitness on a validation slice carved from the training split.
    Validation,
}

/// Everything about the search that is not the GA itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub bitwidth: u32,
    /// Hidden layer widths; input and output sizes come from the dataset.
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub costs: GateCostTable,
    pub domains: GeneDomains,
    pub baseline: QatGenes,
    pub rates: VariationRates,
    pub fitness_split: FitnessSplit,
    pub train_fraction: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            bitwidth: DEFAULT_BITWIDTH,
            hidden_layers: vec![10],
            learning_rate: 0.01,
            optimizer: Optimizer::Adam,
            costs: GateCostTable::default(),
            domains: GeneDomains::default(),
            baseline: QatGenes::default(),
            rates: VariationRates::default(),
            fitness_split: FitnessSplit::Test,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        LevelMask::full(self.bitwidth)?;
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        self.costs.validate()?;
        self.domains.validate()?;
        self.rates.validate()?;
        if !self.domains.contains(&self.baseline) {
            return Err(Error::InvalidConfig(format!("baseline genes {:?} outside their domains", self.baseline)));
        }
        Ok(())
    }
}

/// Outcome of one fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Accuracy on the fitness split.
    pub accuracy: f64,
    pub accuracy_miss: f64,
    /// Accuracy on the test split (equal to `accuracy` in test mode).
    pub test_accuracy: f64,
    pub frontend_area: f64,
    pub per_adc: Vec<AreaEstimate>,
    /// False when training diverged; the model is then the untrained one.
    pub trained: bool,
    pub model: QuantMlp,
}

/// Read-only evaluation context shared by all workers.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    pub settings: SearchSettings,
    pub dataset_name: String,
    pub features: usize,
    pub classes: usize,
    /// Data the model is trained on.
    pub train: Dataset,
    /// Data fitness accuracy is measured on.
    pub fitness: Dataset,
    pub test: Dataset,
}

impl FitnessContext {
    pub fn new(ds: &Dataset, settings: SearchSettings, split_seed: u64) -> Result<Self> {
        settings.validate()?;
        ds.check_trainable()?;
        let split = stratified_split(ds, settings.train_fraction, split_seed)?;
        let train_all = ds.subset(&split.train);
        let test = ds.subset(&split.test);
        let (train, fitness) = match settings.fitness_split {
            FitnessSplit::Test => (train_all, test.clone()),
            FitnessSplit::Validation => {
                let inner = stratified_split(&train_all, 1.0 - VALIDATION_FRACTION, split_seed)?;
                (train_all.subset(&inner.train), train_all.subset(&inner.test))
            }
        };
        Ok(Self {
            settings,
            dataset_name: ds.name.clone(),
            features: ds.feature_count(),
            classes: ds.class_count(),
            train,
            fitness,
            test,
        })
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.features];
        t.extend(&self.settings.hidden_layers);
        t.push(self.classes);
        t
    }

    pub fn baseline(&self) -> Chromosome {
        Chromosome::baseline(self.features, self.settings.bitwidth, self.settings.baseline)
            .expect("bitwidth validated at construction")
    }

    /// Front-end area of the conventional ADC bank.
    pub fn baseline_area(&self) -> f64 {
        area_of(&self.baseline(), &self.settings.costs).0
    }

    pub fn evaluate(&self, ch: &Chromosome, seed: u64) -> Result<EvalResult> {
        let (adcs, cfg, spec) = ch.decode(self.features, &self.settings, seed)?;
        let (frontend_area, per_adc) = area_of(ch, &self.settings.costs);
        let model = QuantMlp::new(&self.topology(), cfg, seed)?;
        let train = digitize(&self.train, &adcs)?;
        let (model, trained) = match qmlp::train(&model, &train, &spec) {
            Ok(m) => (m, true),
            Err(Error::Diverged(msg)) => {
                log::debug!("training diverged: {msg}");
                (model, false)
            }
            Err(e) => return Err(e),
        };
        let (accuracy, test_accuracy) = if trained {
            let acc = qmlp::evaluate(&model, &digitize(&self.fitness, &adcs)?)?;
            let test_acc = match self.settings.fitness_split {
                FitnessSplit::Test => acc,
                FitnessSplit::Validation => qmlp::evaluate(&model, &digitize(&self.test, &adcs)?)?,
            };
            (acc, test_acc)
        } else {
            (0.0, 0.0)
        };
        Ok(EvalResult {
            accuracy,
            accuracy_miss: 1.0 - accuracy,
            test_accuracy,
            frontend_area,
            per_adc,
            trained,
            model,
        })
    }
}

fn area_of(ch: &Chromosome, costs: &GateCostTable) -> (f64, Vec<AreaEstimate>) {
    let per: Vec<AreaEstimate> = ch.adcs().iter().map(|a| estimate_area(a, costs)).collect();
    (per.iter().map(|a| a.total).sum(), per)
}

/// Passes every feature column through its ADC; inputs become `code / 2^N`.
pub fn digitize(ds: &Dataset, adcs: &[PrunedAdc]) -> Result<QuantizedSet> {
    if adcs.len() != ds.feature_count() {
        return Err(Error::ShapeMismatch(format!("{} ADCs for {} features", adcs.len(), ds.feature_count())));
    }
    let mut values = Vec::with_capacity(ds.len() * adcs.len());
    for row in &ds.features {
        for (x, adc) in row.iter().zip(adcs) {
            values.push(adc.digitize(*x) as f64 / (1u64 << adc.bitwidth()) as f64);
        }
    }
    QuantizedSet::new(adcs.len(), values, ds.labels.clone())
}

impl Problem for FitnessContext {
    type Genome = Chromosome;
    type Info = EvalResult;

    fn initial_population(&self, size: usize, rng: &mut ChaCha8Rng) -> Vec<Chromosome> {
        seed_population(size, self.features, self.settings.bitwidth, self.settings.baseline, &self.settings.domains, rng)
            .expect("settings validated at construction")
    }

    fn crossover(&self, a: &Chromosome, b: &Chromosome, rng: &mut ChaCha8Rng) -> (Chromosome, Chromosome) {
        crossover(a, b, self.settings.rates.swap_prob, rng)
    }

    fn mutate(&self, genome: &Chromosome, rng: &mut ChaCha8Rng) -> Chromosome {
        let rates = &self.settings.rates;
        mutate(genome, rates.bit_rate(self.settings.bitwidth), rates.gene_rate, &self.settings.domains, rng)
    }

    fn evaluate(&self, genome: &Chromosome, seed: u64) -> std::result::Result<Evaluation<EvalResult>, String> {
        let res = FitnessContext::evaluate(self, genome, seed).map_err(|e| e.to_string())?;
        Ok(Evaluation { objectives: vec![res.accuracy_miss, res.frontend_area], info: res })
    }

    fn failure_objectives(&self) -> Vec<f64> {
        vec![1.0, f64::MAX]
    }

    fn reference_point(&self) -> Vec<f64> {
        // Slightly beyond the baseline so the conventional design counts.
        vec![1.0, 1.1 * self.baseline_area()]
    }
}
