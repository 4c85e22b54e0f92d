//! JSON parameter file. Every section is optional so fits of different
//! models can accumulate in one file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    EncDecLineParams, HockneyParams, MaxRateClassParams, MaxRateParams, ModelError, Phased,
    PhasedHockneyParams, Result,
};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFile {
    pub alpha_us: f64,
    pub beta_us_per_byte: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HockneyFile {
    pub eager: LineFile,
    pub rendezvous: LineFile,
    pub threshold_bytes: u64,
}

pub type EncDecFile = LineFile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFile {
    pub alpha_us: f64,
    pub a_bytes_per_us: f64,
    pub b_bytes_per_us: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxRateFile {
    pub small: ClassFile,
    pub moderate: ClassFile,
    pub large: ClassFile,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hockney: Option<HockneyFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encdec: Option<EncDecFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxrate: Option<MaxRateFile>,
}

fn line<T: Scalar>(alpha: T, beta: T) -> LineFile {
    LineFile {
        alpha_us: alpha.as_f64(),
        beta_us_per_byte: beta.as_f64(),
    }
}

fn class<T: Scalar>(c: &MaxRateClassParams<T>) -> ClassFile {
    ClassFile {
        alpha_us: c.alpha_enc.as_f64(),
        a_bytes_per_us: c.a.as_f64(),
        b_bytes_per_us: c.b.as_f64(),
    }
}

fn unclass<T: Scalar>(c: &ClassFile) -> MaxRateClassParams<T> {
    MaxRateClassParams::new(T::lit(c.alpha_us), T::lit(c.a_bytes_per_us), T::lit(c.b_bytes_per_us))
}

impl ParamFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::File(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter file serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::File(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Returns the file at `path`, or an empty one if it does not exist.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| ModelError::File(format!("{}: {e}", path.display())))
    }

    pub fn set_hockney<T: Scalar>(&mut self, p: &PhasedHockneyParams<T>) {
        self.hockney = Some(HockneyFile {
            eager: line(p.eager.alpha, p.eager.beta),
            rendezvous: line(p.rendezvous.alpha, p.rendezvous.beta),
            threshold_bytes: p.threshold,
        });
    }

    pub fn set_encdec<T: Scalar>(&mut self, p: &EncDecLineParams<T>) {
        self.encdec = Some(line(p.alpha_enc, p.beta_enc));
    }

    pub fn set_maxrate<T: Scalar>(&mut self, p: &MaxRateParams<T>) {
        self.maxrate = Some(MaxRateFile {
            small: class(&p.small),
            moderate: class(&p.moderate),
            large: class(&p.large),
        });
    }

    fn missing(section: &str) -> ModelError {
        ModelError::File(format!("missing `{section}` section"))
    }

    pub fn hockney<T: Scalar>(&self) -> Result<PhasedHockneyParams<T>> {
        let h = self.hockney.as_ref().ok_or_else(|| Self::missing("hockney"))?;
        if h.threshold_bytes == 0 {
            return Err(ModelError::File("threshold_bytes must be positive".into()));
        }
        let l = |f: &LineFile| HockneyParams::new(T::lit(f.alpha_us), T::lit(f.beta_us_per_byte));
        Ok(Phased {
            eager: l(&h.eager),
            rendezvous: l(&h.rendezvous),
            threshold: h.threshold_bytes,
        })
    }

    pub fn encdec<T: Scalar>(&self) -> Result<EncDecLineParams<T>> {
        let e = self.encdec.as_ref().ok_or_else(|| Self::missing("encdec"))?;
        Ok(EncDecLineParams::new(T::lit(e.alpha_us), T::lit(e.beta_us_per_byte)))
    }

    pub fn maxrate<T: Scalar>(&self) -> Result<MaxRateParams<T>> {
        let m = self.maxrate.as_ref().ok_or_else(|| Self::missing("maxrate"))?;
        Ok(MaxRateParams {
            small: unclass(&m.small),
            moderate: unclass(&m.moderate),
            large: unclass(&m.large),
        })
    }
}
