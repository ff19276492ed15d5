//! Event streams, preprocessing and input encodings.
//!
//! Event files are UTF-8 text with one event per line,
//!
//! ```text
//! # timestamp_us,x,y,polarity
//! 1000,3,4,-1
//! 1250,3,5,1
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Polarity is `-1` or
//! `1` (`+1` is accepted).
//!
//! Preprocessing sums polarities per pixel over windows of one sampling
//! period, optionally crops and pools the summed counts, and only then takes
//! the sign (zero sums become silence).

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::SpikeSymbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub timestamp_us: u64,
    pub x: u32,
    pub y: u32,
    /// `-1` or `+1`.
    pub polarity: i8,
}

/// Parses event text; `path` is only used in error messages.
pub fn parse_events(text: &str, path: &Path) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 comma-separated fields, found {}", fields.len())));
        }
        let timestamp_us = fields[0].parse().map_err(|e| err(format!("timestamp {:?}: {e}", fields[0])))?;
        let x = fields[1].parse().map_err(|e| err(format!("x {:?}: {e}", fields[1])))?;
        let y = fields[2].parse().map_err(|e| err(format!("y {:?}: {e}", fields[2])))?;
        let polarity = match fields[3] {
            "-1" => -1,
            "1" | "+1" => 1,
            other => return Err(err(format!("polarity {other:?} is not -1 or +1"))),
        };
        events.push(EventRecord {
            timestamp_us,
            x,
            y,
            polarity,
        });
    }
    events.sort_by_key(|e| e.timestamp_us);
    Ok(events)
}

/// Reads and parses an event file, sorted by timestamp.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text, path)
}

pub fn write_events(path: impl AsRef<Path>, events: &[EventRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        writeln!(w, "# timestamp_us,x,y,polarity")?;
        for e in events {
            writeln!(w, "{},{},{},{}", e.timestamp_us, e.x, e.y, e.polarity)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Per-pixel polarity sums, `sums[t][y * width + x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumFrames {
    pub width: usize,
    pub height: usize,
    pub sums: Vec<Vec<i32>>,
}

/// Signed frames with values in `{-1, 0, +1}`, `values[t][y * width + x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedFrames {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Vec<i8>>,
}

impl SumFrames {
    pub fn steps(&self) -> usize {
        self.sums.len()
    }

    pub fn sign(&self) -> SignedFrames {
        SignedFrames {
            width: self.width,
            height: self.height,
            values: self
                .sums
                .iter()
                .map(|f| f.iter().map(|v| v.signum() as i8).collect())
                .collect(),
        }
    }
}

impl SignedFrames {
    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Sums polarities over windows `[k·period, (k+1)·period)`, `k < steps`.
/// Events at or after `steps · period` are dropped.
pub fn bin_event_sums(events: &[EventRecord], period_us: u64, steps: usize, width: usize, height: usize) -> Result<SumFrames> {
    if period_us == 0 {
        return Err(Error::InvalidParameter("sampling period must be > 0".into()));
    }
    let mut sums = vec![vec![0i32; width * height]; steps];
    for e in events {
        let k = e.timestamp_us / period_us;
        if k >= steps as u64 {
            continue;
        }
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= width || y >= height {
            return Err(Error::InvalidParameter(format!(
                "event at ({x}, {y}) outside {width}×{height} sensor"
            )));
        }
        sums[k as usize][y * width + x] += e.polarity as i32;
    }
    Ok(SumFrames { width, height, sums })
}

/// Sign of [`bin_event_sums`].
pub fn bin_events(events: &[EventRecord], period_us: u64, steps: usize, width: usize, height: usize) -> Result<SignedFrames> {
    Ok(bin_event_sums(events, period_us, steps, width, height)?.sign())
}

/// Central `width × height` window; odd margins drop the extra column or
/// row on the right and bottom.
pub fn center_crop(frames: &SumFrames, width: usize, height: usize) -> Result<SumFrames> {
    if width > frames.width || height > frames.height {
        return Err(Error::InvalidParameter(format!(
            "crop {width}×{height} larger than {}×{}",
            frames.width, frames.height
        )));
    }
    let x0 = (frames.width - width) / 2;
    let y0 = (frames.height - height) / 2;
    let sums = frames
        .sums
        .iter()
        .map(|f| {
            (0..height)
                .flat_map(|y| (0..width).map(move |x| (x, y)))
                .map(|(x, y)| f[(y + y0) * frames.width + x + x0])
                .collect()
        })
        .collect();
    Ok(SumFrames { width, height, sums })
}

/// Sums `factor × factor` blocks of counts.
pub fn spatial_pool(frames: &SumFrames, factor: usize) -> Result<SumFrames> {
    if factor == 0 || !frames.width.is_multiple_of(factor) || !frames.height.is_multiple_of(factor) {
        return Err(Error::InvalidParameter(format!(
            "{}×{} not divisible by pooling factor {factor}",
            frames.width, frames.height
        )));
    }
    let (w, h) = (frames.width / factor, frames.height / factor);
    let sums = frames
        .sums
        .iter()
        .map(|f| {
            let mut out = vec![0i32; w * h];
            for y in 0..frames.height {
                for x in 0..frames.width {
                    out[(y / factor) * w + x / factor] += f[y * frames.width + x];
                }
            }
            out
        })
        .collect();
    Ok(SumFrames { width: w, height: h, sums })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// One `C = 2` circuit per pixel: `-1 → e_1`, `+1 → e_2`.
    Wta,
    /// One `C = 1` circuit per pixel spiking on any event.
    Unsigned,
    /// Two `C = 1` circuits per pixel, for negative and positive events.
    PerSign,
}

impl Encoding {
    /// `(circuits per pixel, units per circuit)`.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Encoding::Wta => (1, 2),
            Encoding::Unsigned => (1, 1),
            Encoding::PerSign => (2, 1),
        }
    }
}

/// `symbols[t][n]` of `N` input circuits over `T` steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub units: Vec<u8>,
    pub symbols: Vec<Vec<SpikeSymbol>>,
    pub label: usize,
}

impl EncodedSequence {
    pub fn steps(&self) -> usize {
        self.symbols.len()
    }

    pub fn circuits(&self) -> usize {
        self.units.len()
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.symbols {
            if row.len() != self.units.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.units.len(),
                    got: row.len(),
                });
            }
            for (s, &c) in row.iter().zip(&self.units) {
                s.check(c as usize)?;
            }
        }
        Ok(())
    }
}

pub fn encode(frames: &SignedFrames, encoding: Encoding, label: usize) -> EncodedSequence {
    match encoding {
        Encoding::Wta => encode_wta(frames, label),
        Encoding::Unsigned => encode_unsigned(frames, label),
        Encoding::PerSign => encode_per_sign(frames, label),
    }
}

pub fn encode_wta(frames: &SignedFrames, label: usize) -> EncodedSequence {
    let symbols = frames
        .values
        .iter()
        .map(|f| {
            f.iter()
                .map(|&v| match v {
                    -1 => SpikeSymbol::unit(0),
                    1 => SpikeSymbol::unit(1),
                    _ => SpikeSymbol::SILENCE,
                })
                .collect()
        })
        .collect();
    EncodedSequence {
        units: vec![2; frames.pixels()],
        symbols,
        label,
    }
}

pub fn encode_unsigned(frames: &SignedFrames, label: usize) -> EncodedSequence {
    let symbols = frames
        .values
        .iter()
        .map(|f| {
            f.iter()
                .map(|&v| if v != 0 { SpikeSymbol::unit(0) } else { SpikeSymbol::SILENCE })
                .collect()
        })
        .collect();
    EncodedSequence {
        units: vec![1; frames.pixels()],
        symbols,
        label,
    }
}

/// Circuit `2p` carries the negative events of pixel `p`, circuit `2p + 1`
/// the positive ones.
pub fn encode_per_sign(frames: &SignedFrames, label: usize) -> EncodedSequence {
    let spike = |on: bool| if on { SpikeSymbol::unit(0) } else { SpikeSymbol::SILENCE };
    let symbols = frames
        .values
        .iter()
        .map(|f| f.iter().flat_map(|&v| [spike(v < 0), spike(v > 0)]).collect())
        .collect();
    EncodedSequence {
        units: vec![1; 2 * frames.pixels()],
        symbols,
        label,
    }
}

/// Inverse of [`encode_wta`] on the per-step values.
pub fn decode_wta(seq: &EncodedSequence) -> Result<Vec<Vec<i8>>> {
    if seq.units.iter().any(|&c| c != 2) {
        return Err(Error::InvalidParameter("decode_wta expects C = 2 circuits".into()));
    }
    seq.symbols
        .iter()
        .map(|row| {
            row.iter()
                .map(|s| match s.unit_index() {
                    None => Ok(0),
                    Some(0) => Ok(-1),
                    Some(1) => Ok(1),
                    Some(c) => Err(Error::InvalidParameter(format!("unit {c} in a C = 2 circuit"))),
                })
                .collect()
        })
        .collect()
}

/// From raw events to an encoded sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    pub period_us: u64,
    pub steps: usize,
    /// Sensor geometry.
    pub width: usize,
    pub height: usize,
    /// Center crop applied before pooling.
    pub crop: Option<(usize, usize)>,
    /// Pooling factor; 1 disables pooling.
    pub pool: usize,
    pub encoding: Encoding,
}

impl Pipeline {
    /// Geometry after cropping and pooling.
    pub fn output_size(&self) -> (usize, usize) {
        let (w, h) = self.crop.unwrap_or((self.width, self.height));
        (w / self.pool.max(1), h / self.pool.max(1))
    }

    /// Number of input circuits produced per example.
    pub fn circuits(&self) -> usize {
        let (w, h) = self.output_size();
        w * h * self.encoding.shape().0
    }

    pub fn run(&self, events: &[EventRecord], label: usize) -> Result<EncodedSequence> {
        let mut sums = bin_event_sums(events, self.period_us, self.steps, self.width, self.height)?;
        if let Some((w, h)) = self.crop {
            sums = center_crop(&sums, w, h)?;
        }
        if self.pool > 1 {
            sums = spatial_pool(&sums, self.pool)?;
        }
        Ok(encode(&sums.sign(), self.encoding, label))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Event file, relative to the manifest's directory unless absolute.
    pub file: PathBuf,
    pub label: usize,
}

/// TOML list of labelled event files.
///
/// ```toml
/// split = "train"
/// period_us = 1000
/// crop_ms = 50
/// width = 16
/// height = 1
/// n_classes = 2
///
/// [[examples]]
/// file = "train/000000.txt"
/// label = 0
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub split: Split,
    pub period_us: u64,
    pub crop_ms: u64,
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
    pub examples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Number of sampling periods in the crop window.
    pub fn steps(&self) -> usize {
        (self.crop_ms * 1000 / self.period_us.max(1)) as usize
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.period_us == 0 {
            return Err("period_us must be > 0".into());
        }
        if self.steps() == 0 {
            return Err(format!("crop of {} ms is shorter than one period", self.crop_ms));
        }
        if self.n_classes == 0 {
            return Err("n_classes must be > 0".into());
        }
        if let Some(e) = self.examples.iter().find(|e| e.label >= self.n_classes) {
            return Err(format!("{}: label {} ≥ n_classes {}", e.file.display(), e.label, self.n_classes));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        manifest.validate().map_err(|reason| Error::Manifest {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads every example through `pipeline`, resolving relative files
    /// against `base`.
    pub fn load_sequences(&self, base: &Path, pipeline: &Pipeline) -> Result<Vec<EncodedSequence>> {
        self.examples
            .iter()
            .map(|e| {
                let path = if e.file.is_absolute() { e.file.clone() } else { base.join(&e.file) };
                pipeline.run(&load_events(&path)?, e.label)
            })
            .collect()
    }
}

const CACHE_MAGIC: &[u8; 4] = b"WSEQ";

/// Binary layout: `"WSEQ"`, then little-endian `u32` T, N and label, then N
/// bytes of per-circuit C, then T·N symbol codes in time-major order
/// (0 = silence, c = spike at unit c counted from 1).
pub fn write_cache(path: impl AsRef<Path>, seq: &EncodedSequence) -> Result<()> {
    let path = path.as_ref();
    seq.validate()?;
    let mut buf = Vec::with_capacity(16 + seq.circuits() * (1 + seq.steps()));
    buf.extend_from_slice(CACHE_MAGIC);
    for v in [seq.steps(), seq.circuits(), seq.label] {
        let v = u32::try_from(v).map_err(|_| Error::Cache(format!("{v} does not fit in u32")))?;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&seq.units);
    for row in &seq.symbols {
        buf.extend(row.iter().map(|s| s.code()));
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<EncodedSequence> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::Cache("missing header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (steps, n, label) = (word(0), word(1), word(2));
    let expected = 16 + n + steps * n;
    if bytes.len() != expected {
        return Err(Error::Cache(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let units = bytes[16..16 + n].to_vec();
    let symbols = bytes[16 + n..]
        .chunks(n.max(1))
        .take(steps)
        .map(|row| row.iter().map(|&c| SpikeSymbol::from_code(c)).collect())
        .collect();
    let seq = EncodedSequence { units, symbols, label };
    seq.validate().map_err(|e| Error::Cache(e.to_string()))?;
    Ok(seq)
}

/// Parameters of the synthetic polarity task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_pixels: usize,
    pub steps: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub period_us: u64,
    /// Probability that a pixel is active at a step of the base mask.
    pub density: f64,
    /// Largest shift, in steps, applied to each event of a base mask.
    pub jitter: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_pixels: 16,
            steps: 50,
            n_classes: 2,
            n_train: 2000,
            n_test: 200,
            period_us: 1000,
            density: 0.5,
            jitter: 1,
            seed: 0,
        }
    }
}

/// Labelled event streams of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSplit {
    pub examples: Vec<(Vec<EventRecord>, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthTask {
    pub spec: SynthSpec,
    /// `signs[class][pixel]`, the polarity every event of that class carries.
    pub signs: Vec<Vec<i8>>,
    pub train: SynthSplit,
    pub test: SynthSplit,
}

/// Classes that differ only in event polarity.
///
/// Examples come in groups of `n_classes`, one per class, that share a
/// single jittered timing mask; each class stamps its own fixed per-pixel
/// polarity onto the mask. Unsigned encodings within a group are therefore
/// identical, and every pixel fires at least once so any two classes'
/// polarity encodings differ.
pub fn synth_polarity_task(spec: &SynthSpec) -> Result<SynthTask> {
    if spec.n_classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {}", spec.n_classes)));
    }
    if spec.n_pixels == 0 || spec.steps == 0 || spec.period_us == 0 {
        return Err(Error::InvalidParameter("pixels, steps and period must be > 0".into()));
    }
    if !(0.0..=1.0).contains(&spec.density) {
        return Err(Error::InvalidParameter(format!("density {} outside [0, 1]", spec.density)));
    }
    if spec.n_pixels < 64 && (1u64 << spec.n_pixels) < spec.n_classes as u64 {
        return Err(Error::InvalidParameter(format!(
            "{} pixels cannot carry {} distinct polarity patterns",
            spec.n_pixels, spec.n_classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut signs: Vec<Vec<i8>> = Vec::with_capacity(spec.n_classes);
    while signs.len() < spec.n_classes {
        let candidate: Vec<i8> = (0..spec.n_pixels).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        if !signs.contains(&candidate) {
            signs.push(candidate);
        }
    }

    let split = |count: usize, rng: &mut ChaCha8Rng| {
        let groups = count.div_ceil(spec.n_classes);
        let mut examples = Vec::with_capacity(groups * spec.n_classes);
        for _ in 0..groups {
            let mask = timing_mask(spec, rng);
            for (class, class_signs) in signs.iter().enumerate() {
                let events = mask
                    .iter()
                    .map(|&(timestamp_us, pixel)| EventRecord {
                        timestamp_us,
                        x: pixel as u32,
                        y: 0,
                        polarity: class_signs[pixel],
                    })
                    .collect();
                examples.push((events, class));
            }
        }
        examples.truncate(count);
        SynthSplit { examples }
    };
    let train = split(spec.n_train, &mut rng);
    let test = split(spec.n_test, &mut rng);
    Ok(SynthTask {
        spec: spec.clone(),
        signs,
        train,
        test,
    })
}

/// Sorted `(timestamp, pixel)` pairs with at most one event per pixel and
/// step, and every pixel active at least once.
fn timing_mask(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<(u64, usize)> {
    let mut active = vec![vec![false; spec.n_pixels]; spec.steps];
    for pixel in 0..spec.n_pixels {
        let mut any = false;
        for t in 0..spec.steps {
            if rng.gen::<f64>() < spec.density {
                let shift = rng.gen_range(0..=2 * spec.jitter) as i64 - spec.jitter as i64;
                let t = (t as i64 + shift).clamp(0, spec.steps as i64 - 1) as usize;
                active[t][pixel] = true;
                any = true;
            }
        }
        if !any {
            active[rng.gen_range(0..spec.steps)][pixel] = true;
        }
    }
    let mut mask = Vec::new();
    for (t, row) in active.iter().enumerate() {
        for (pixel, &on) in row.iter().enumerate() {
            if on {
                let offset = rng.gen_range(0..spec.period_us);
                mask.push((t as u64 * spec.period_us + offset, pixel));
            }
        }
    }
    mask.sort_unstable();
    mask
}

impl SynthTask {
    /// Writes event files and `train.toml` / `test.toml` into `dir`; returns
    /// the two manifest paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        let mut out = Vec::new();
        for (name, split, tag) in [("train", &self.train, Split::Train), ("test", &self.test, Split::Test)] {
            let sub = dir.join(name);
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            let mut entries = Vec::with_capacity(split.examples.len());
            for (n, (events, label)) in split.examples.iter().enumerate() {
                let file = PathBuf::from(name).join(format!("{n:06}.txt"));
                write_events(dir.join(&file), events)?;
                entries.push(ManifestEntry { file, label: *label });
            }
            let manifest = DatasetManifest {
                split: tag,
                period_us: self.spec.period_us,
                crop_ms: self.spec.steps as u64 * self.spec.period_us / 1000,
                width: self.spec.n_pixels,
                height: 1,
                n_classes: self.spec.n_classes,
                examples: entries,
            };
            let path = dir.join(format!("{name}.toml"));
            manifest.save(&path)?;
            out.push(path);
        }
        Ok((out.remove(0), out.remove(0)))
    }

    /// Pipeline that turns this task's events into `encoding` inputs.
    pub fn pipeline(&self, encoding: Encoding) -> Pipeline {
        Pipeline {
            period_us: self.spec.period_us,
            steps: self.spec.steps,
            width: self.spec.n_pixels,
            height: 1,
            crop: None,
            pool: 1,
            encoding,
        }
    }

    pub fn encode(&self, split: &SynthSplit, encoding: Encoding) -> Result<Vec<EncodedSequence>> {
        let pipeline = self.pipeline(encoding);
        split.examples.iter().map(|(ev, label)| pipeline.run(ev, *label)).collect()
    }
}

/// Shuffles in place with a seeded generator.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}
