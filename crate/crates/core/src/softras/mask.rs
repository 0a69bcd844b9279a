use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary segmentation mask. `amodal` marks a mask of the full hand extent,
/// not truncated by occluders; it is metadata supplied with the mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
    amodal: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    width: usize,
    height: usize,
    amodal: bool,
}

impl MaskImage {
    /// `data` is row-major with values 0 or 1.
    pub fn new(width: usize, height: usize, data: Vec<u8>, amodal: bool) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "mask size must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension {
                what: "mask pixels",
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Parameter(format!("mask values must be 0 or 1, found {v}")));
        }
        Ok(Self {
            width,
            height,
            data,
            amodal,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool, amodal: bool) -> Result<Self> {
        Self::new(width, height, vec![value as u8; width * height], amodal)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_amodal(&self) -> bool {
        self.amodal
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Binary PGM, 0 or 255 per pixel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| v * 255));
        out
    }

    /// Parses a binary PGM; pixels above half the max value are set.
    pub fn from_pgm(bytes: &[u8], amodal: bool) -> Result<Self> {
        let mut reader = BufReader::new(bytes);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Format("truncated PGM header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header.len() != 4 || header[0] != "P5" {
            return Err(Error::Format("expected a binary PGM (P5) header".into()));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad PGM header field '{s}'")))
        };
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM max value {maxval}")));
        }
        let mut pixels = Vec::new();
        reader.read_to_end(&mut pixels)?;
        if pixels.len() != width * height {
            return Err(Error::Format(format!(
                "PGM has {} pixel bytes, expected {}",
                pixels.len(),
                width * height
            )));
        }
        let data = pixels.iter().map(|&v| (2 * v as usize > maxval) as u8).collect();
        Self::new(width, height, data, amodal)
    }

    /// Sidecar path holding the amodal flag: `mask.pgm` -> `mask.pgm.json`.
    pub fn sidecar_path(pgm: &Path) -> PathBuf {
        let mut s = pgm.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn save(&self, pgm: &Path) -> Result<()> {
        std::fs::File::create(pgm)?.write_all(&self.to_pgm())?;
        let sidecar = Sidecar {
            width: self.width,
            height: self.height,
            amodal: self.amodal,
        };
        std::fs::write(Self::sidecar_path(pgm), serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }

    pub fn load(pgm: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(pgm))?)?;
        let mask = Self::from_pgm(&std::fs::read(pgm)?, sidecar.amodal)?;
        if (mask.width, mask.height) != (sidecar.width, sidecar.height) {
            return Err(Error::Format(format!(
                "sidecar says {}x{}, image is {}x{}",
                sidecar.width, sidecar.height, mask.width, mask.height
            )));
        }
        Ok(mask)
    }
}
