//! JSON container for channel realizations and designs. Complex matrices are
//! stored row-major with interleaved real/imaginary parts; loading
//! reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, Gains, LargeScaleMap, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::sum_mse::{PrecoderSet, ReceiverSet};

const CHANNEL_KIND: &str = "channel_set";
const PRECODER_KIND: &str = "precoder_set";
const RECEIVER_KIND: &str = "receiver_set";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(2 * m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push(z.re);
                data.push(z.im);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != 2 * self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "matrix record {}x{} holds {} values, expected {}",
                self.rows,
                self.cols,
                self.data.len(),
                2 * self.rows * self.cols
            )));
        }
        let cols = self.cols;
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = 2 * (i * cols + j);
            C64::new(self.data[k], self.data[k + 1])
        }))
    }
}

fn records(ms: &[CMat]) -> Vec<MatrixRecord> {
    ms.iter().map(MatrixRecord::from_matrix).collect()
}

fn matrices(rs: &[MatrixRecord]) -> Result<Vec<CMat>> {
    rs.iter().map(MatrixRecord::to_matrix).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GainsRecord {
    bm: MatrixRecord,
    bs: Vec<MatrixRecord>,
    sm: Vec<MatrixRecord>,
    ss: Vec<Vec<MatrixRecord>>,
}

impl GainsRecord {
    fn new(g: &Gains) -> Self {
        Self {
            bm: MatrixRecord::from_matrix(&g.bm),
            bs: records(&g.bs),
            sm: records(&g.sm),
            ss: g.ss.iter().map(|row| records(row)).collect(),
        }
    }

    fn into_gains(self, dims: &SystemDims) -> Result<Gains> {
        let g = Gains {
            dims: dims.clone(),
            bm: self.bm.to_matrix()?,
            bs: matrices(&self.bs)?,
            sm: matrices(&self.sm)?,
            ss: self.ss.iter().map(|row| matrices(row)).collect::<Result<_>>()?,
        };
        g.check_dims()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    kind: String,
    version: u32,
    dims: SystemDims,
    seed: u64,
    beta: LargeScaleMap,
    h: GainsRecord,
    g: Option<GainsRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrecoderFile {
    kind: String,
    version: u32,
    n_s: usize,
    w_bs: MatrixRecord,
    w_sc: Vec<MatrixRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverFile {
    kind: String,
    version: u32,
    r_bs: Vec<MatrixRecord>,
    r_sc: Vec<Vec<MatrixRecord>>,
}

fn check_header(kind: &str, version: u32, expected: &str) -> Result<()> {
    if kind != expected || version != VERSION {
        return Err(Error::Config(format!(
            "expected a {expected} container version {VERSION}, found {kind} version {version}"
        )));
    }
    Ok(())
}

pub fn channel_to_json(ch: &ChannelSet) -> Result<String> {
    let file = ChannelFile {
        kind: CHANNEL_KIND.into(),
        version: VERSION,
        dims: ch.dims().clone(),
        seed: ch.seed,
        beta: ch.beta.clone(),
        h: GainsRecord::new(&ch.h),
        g: ch.g.as_ref().map(GainsRecord::new),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn channel_from_json(text: &str) -> Result<ChannelSet> {
    let file: ChannelFile = serde_json::from_str(text)?;
    check_header(&file.kind, file.version, CHANNEL_KIND)?;
    file.dims.validate()?;
    let h = file.h.into_gains(&file.dims)?;
    let g = file.g.map(|g| g.into_gains(&file.dims)).transpose()?;
    Ok(ChannelSet { seed: file.seed, beta: file.beta, h, g })
}

pub fn precoders_to_json(w: &PrecoderSet) -> Result<String> {
    let file = PrecoderFile {
        kind: PRECODER_KIND.into(),
        version: VERSION,
        n_s: w.n_s,
        w_bs: MatrixRecord::from_matrix(&w.w_bs),
        w_sc: records(&w.w_sc),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn precoders_from_json(text: &str) -> Result<PrecoderSet> {
    let file: PrecoderFile = serde_json::from_str(text)?;
    check_header(&file.kind, file.version, PRECODER_KIND)?;
    Ok(PrecoderSet { n_s: file.n_s, w_bs: file.w_bs.to_matrix()?, w_sc: matrices(&file.w_sc)? })
}

pub fn receivers_to_json(r: &ReceiverSet) -> Result<String> {
    let file = ReceiverFile {
        kind: RECEIVER_KIND.into(),
        version: VERSION,
        r_bs: records(&r.r_bs),
        r_sc: r.r_sc.iter().map(|c| records(c)).collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn receivers_from_json(text: &str) -> Result<ReceiverSet> {
    let file: ReceiverFile = serde_json::from_str(text)?;
    check_header(&file.kind, file.version, RECEIVER_KIND)?;
    Ok(ReceiverSet {
        r_bs: matrices(&file.r_bs)?,
        r_sc: file.r_sc.iter().map(|c| matrices(c)).collect::<Result<_>>()?,
    })
}

pub fn save_channel(path: &Path, ch: &ChannelSet) -> Result<()> {
    fs::write(path, channel_to_json(ch)?)?;
    Ok(())
}

pub fn load_channel(path: &Path) -> Result<ChannelSet> {
    channel_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{effective_gains, sample_channels, PowerConfig};
    use crate::sum_mse::initial_iterate;

    #[test]
    fn channel_round_trip_is_bit_exact() {
        let d = SystemDims::desk();
        let ls = LargeScaleMap::uniform(&d, 3.7e-11);
        let ch = effective_gains(&sample_channels(&d, &ls, 21).unwrap(), &PowerConfig::default());
        let back = channel_from_json(&channel_to_json(&ch).unwrap()).unwrap();
        assert_eq!(back, ch);
        for (a, b) in back.h.bm.iter().zip(ch.h.bm.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn designs_round_trip() {
        let d = SystemDims::desk();
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 2).unwrap();
        let it = initial_iterate(&ch.h, 0.3, 1).unwrap();
        assert_eq!(precoders_from_json(&precoders_to_json(&it.w).unwrap()).unwrap(), it.w);
        assert_eq!(receivers_from_json(&receivers_to_json(&it.r).unwrap()).unwrap(), it.r);
    }

    #[test]
    fn row_major_interleaved_layout() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 2.0), C64::new(3.0, 4.0), C64::new(5.0, 6.0), C64::new(7.0, 8.0)]);
        let r = MatrixRecord::from_matrix(&m);
        assert_eq!(r.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(r.to_matrix().unwrap(), m);
    }

    #[test]
    fn wrong_kind_or_length_rejected() {
        let d = SystemDims::desk();
        let it = initial_iterate(&Gains::zeros(&d).map(|_, _, m| m.map(|_| C64::new(1.0, 0.0))), 1.0, 1).unwrap();
        let text = precoders_to_json(&it.w).unwrap();
        assert!(receivers_from_json(&text).is_err());
        let bad = MatrixRecord { rows: 2, cols: 2, data: vec![0.0; 3] };
        assert!(bad.to_matrix().is_err());
    }
}
