use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::sim::{MotorCommand, Observation, Pose, TrajectoryId};

pub const DATASET_FORMAT: &str = "tng-dataset/1";

/// Where a block of samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    ExpertLap,
    Dagger(u32),
    Augmentation,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::ExpertLap => f.write_str("expert-lap"),
            Source::Dagger(k) => write!(f, "dagger-iteration-{k}"),
            Source::Augmentation => f.write_str("augmentation"),
        }
    }
}

impl FromStr for Source {
    type Err = TngError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expert-lap" => Ok(Source::ExpertLap),
            "augmentation" => Ok(Source::Augmentation),
            _ => s
                .strip_prefix("dagger-iteration-")
                .and_then(|k| k.parse().ok())
                .map(Source::Dagger)
                .ok_or_else(|| TngError::Parse {
                    location: "field `source`".into(),
                    message: format!("unknown sample source `{s}`"),
                }),
        }
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSample<T> {
    pub observation: Observation<T>,
    pub command: MotorCommand<T>,
    pub pose: Pose<T>,
    pub trajectory_id: TrajectoryId,
}

/// Ordered samples with per-source bookkeeping; provenance counts always sum
/// to the sample count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    samples: Vec<DemoSample<T>>,
    sources: Vec<Source>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    feature_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Record<T> {
    features: Vec<T>,
    command: [T; 2],
    pose: [T; 3],
    trajectory_id: TrajectoryId,
    source: Source,
}

impl<T: Scalar> Dataset<T> {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: DemoSample<T>, source: Source) {
        self.samples.push(sample);
        self.sources.push(source);
    }

    pub fn extend(&mut self, other: &Dataset<T>) {
        self.samples.extend(other.samples.iter().cloned());
        self.sources.extend(other.sources.iter().copied());
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[DemoSample<T>] {
        &self.samples
    }

    pub fn source_of(&self, i: usize) -> Source {
        self.sources[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DemoSample<T>, Source)> {
        self.samples.iter().zip(self.sources.iter().copied())
    }

    /// `(source, count)` in first-appearance order.
    pub fn provenance(&self) -> Vec<(Source, usize)> {
        let mut out: Vec<(Source, usize)> = Vec::new();
        for s in &self.sources {
            match out.iter_mut().find(|(k, _)| k == s) {
                Some((_, n)) => *n += 1,
                None => out.push((*s, 1)),
            }
        }
        out
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.observation.dim())
    }

    /// Design matrix (n × d) and targets (n × 2).
    pub fn to_matrices(&self) -> Result<(Matrix<T>, Matrix<T>)> {
        let d = self
            .feature_dim()
            .ok_or_else(|| TngError::EmptyDataset("no samples to train on".into()))?;
        let mut x = Vec::with_capacity(self.len() * d);
        let mut y = Vec::with_capacity(self.len() * 2);
        for s in &self.samples {
            s.observation.check_dim(d)?;
            x.extend_from_slice(&s.observation.features);
            y.extend_from_slice(&s.command.to_array());
        }
        Ok((
            Matrix::from_vec(self.len(), d, x)?,
            Matrix::from_vec(self.len(), 2, y)?,
        ))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = Header {
            format: DATASET_FORMAT.into(),
            feature_dim: self.feature_dim().unwrap_or(0),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for (s, source) in self.iter() {
            let rec = Record {
                features: s.observation.features.clone(),
                command: s.command.to_array(),
                pose: s.pose.to_array(),
                trajectory_id: s.trajectory_id,
                source,
            };
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, e: &dyn fmt::Display| TngError::Parse {
            location: format!("line {}", line + 1),
            message: e.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| TngError::Parse {
            location: "line 1".into(),
            message: "missing dataset header".into(),
        })?;
        let first = first.map_err(|e| parse_err(0, &e))?;
        let header: Header = serde_json::from_str(&first).map_err(|e| parse_err(0, &e))?;
        if header.format != DATASET_FORMAT {
            return Err(parse_err(
                0,
                &format!("unexpected format `{}`", header.format),
            ));
        }
        let mut data = Dataset::new();
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i, &e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record<T> = serde_json::from_str(&line).map_err(|e| parse_err(i, &e))?;
            if rec.features.len() != header.feature_dim {
                return Err(parse_err(
                    i,
                    &format!(
                        "record has {} features, header says {}",
                        rec.features.len(),
                        header.feature_dim
                    ),
                ));
            }
            data.push(
                DemoSample {
                    observation: Observation::new(rec.features, T::zero()),
                    command: MotorCommand::new(rec.command[0], rec.command[1]),
                    pose: Pose::new(rec.pose[0], rec.pose[1], rec.pose[2]),
                    trajectory_id: rec.trajectory_id,
                },
                rec.source,
            );
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: f64) -> DemoSample<f64> {
        DemoSample {
            observation: Observation::new(vec![v, -v, 0.5], 0.0),
            command: MotorCommand::new(0.5, v / 10.0),
            pose: Pose::new(v, 0.0, 0.1),
            trajectory_id: 2,
        }
    }

    #[test]
    fn provenance_counts_sum() {
        let mut d = Dataset::new();
        d.push(sample(1.0), Source::ExpertLap);
        d.push(sample(2.0), Source::ExpertLap);
        d.push(sample(3.0), Source::Dagger(1));
        d.push(sample(4.0), Source::Augmentation);
        let p = d.provenance();
        assert_eq!(
            p,
            vec![
                (Source::ExpertLap, 2),
                (Source::Dagger(1), 1),
                (Source::Augmentation, 1)
            ]
        );
        assert_eq!(p.iter().map(|(_, n)| n).sum::<usize>(), d.len());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut d = Dataset::new();
        d.push(sample(1.25), Source::ExpertLap);
        d.push(sample(-0.5), Source::Dagger(3));
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"format\":\"tng-dataset/1\",\"feature_dim\":3}"));
        let back = Dataset::<f64>::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_bad_records() {
        let text = "{\"format\":\"tng-dataset/1\",\"feature_dim\":2}\n{\"features\":[1.0],\"command\":[0,0],\"pose\":[0,0,0],\"trajectory_id\":0,\"source\":\"expert-lap\"}\n";
        match Dataset::<f64>::read_jsonl(text.as_bytes()) {
            Err(TngError::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\"format\":\"tng-dataset/1\",\"feature_dim\":1}\n{\"features\":[1.0],\"command\":[0,0],\"pose\":[0,0,0],\"trajectory_id\":0,\"source\":\"teleport\"}\n";
        assert!(Dataset::<f64>::read_jsonl(text.as_bytes()).is_err());
    }
}
