use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidConfig(format!("unknown split {s:?}"))),
        }
    }
}

/// Dataset size and split layout.
///
/// Train-side targets are variants `0..n_per_digit` of every digit; each is
/// swept to several final positions, one of which goes to validation when
/// there are at least two. Test targets are the held-out variants that
/// follow, swept to `test_positions` positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub digits: Vec<u8>,
    pub n_per_digit: usize,
    pub n_positions: usize,
    /// Spread exactly this many train-side samples over the targets instead
    /// of `n_positions` each; earlier targets take the remainder.
    pub train_side_total: Option<usize>,
    pub validation: bool,
    pub test_per_digit: usize,
    pub test_positions: usize,
}

impl Profile {
    pub fn smoke() -> Self {
        Self {
            name: "smoke".into(),
            digits: vec![0],
            n_per_digit: 1,
            n_positions: 1,
            train_side_total: None,
            validation: true,
            test_per_digit: 1,
            test_positions: 1,
        }
    }

    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            digits: (0..10).collect(),
            n_per_digit: 2,
            n_positions: 6,
            train_side_total: None,
            validation: true,
            test_per_digit: 1,
            test_positions: 6,
        }
    }

    /// 13 targets per digit, 4080 train-side samples (3950 train + 130 val)
    /// and 210 test samples.
    pub fn full() -> Self {
        Self {
            name: "full".into(),
            digits: (0..10).collect(),
            n_per_digit: 13,
            n_positions: 31,
            train_side_total: Some(4080),
            validation: true,
            test_per_digit: 3,
            test_positions: 7,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "smoke" => Ok(Self::smoke()),
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            _ => Err(Error::InvalidConfig(format!("unknown profile {name:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.digits.is_empty() || self.n_per_digit == 0 || self.n_positions == 0 {
            return Err(Error::InvalidConfig(format!(
                "profile {:?} must be positive",
                self.name
            )));
        }
        if self.digits.iter().any(|&d| d > 9) {
            return Err(Error::InvalidConfig("digits must be 0-9".into()));
        }
        if self.test_per_digit > 0 && self.test_positions == 0 {
            return Err(Error::InvalidConfig("test_positions must be positive".into()));
        }
        if let Some(total) = self.train_side_total {
            if total < self.digits.len() * self.n_per_digit {
                return Err(Error::InvalidConfig(
                    "train_side_total below one sample per target".into(),
                ));
            }
        }
        Ok(())
    }

    fn positions_per_target(&self) -> Vec<usize> {
        let targets = self.digits.len() * self.n_per_digit;
        match self.train_side_total {
            None => vec![self.n_positions; targets],
            Some(total) => {
                let (base, extra) = (total / targets, total % targets);
                (0..targets).map(|t| base + usize::from(t < extra)).collect()
            }
        }
    }

    /// Every sample the profile produces, in generation order.
    pub fn plan(&self) -> Result<Vec<SamplePlan>> {
        self.validate()?;
        let per_target = self.positions_per_target();
        let mut out = Vec::new();
        let mut t = 0;
        for &digit in &self.digits {
            for variant in 0..self.n_per_digit {
                let m = per_target[t];
                let val_pos = (self.validation && m >= 2).then_some(t % m);
                for position in 0..m {
                    let split = if Some(position) == val_pos {
                        Split::Val
                    } else {
                        Split::Train
                    };
                    out.push(SamplePlan::new(split, digit, variant, position, m));
                }
                t += 1;
            }
        }
        for &digit in &self.digits {
            for k in 0..self.test_per_digit {
                for position in 0..self.test_positions {
                    out.push(SamplePlan::new(
                        Split::Test,
                        digit,
                        self.n_per_digit + k,
                        position,
                        self.test_positions,
                    ));
                }
            }
        }
        Ok(out)
    }

    pub fn counts(&self) -> Result<SplitCounts> {
        let mut c = SplitCounts::default();
        for p in self.plan()? {
            match p.split {
                Split::Train => c.train += 1,
                Split::Val => c.val += 1,
                Split::Test => c.test += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub id: String,
    pub split: Split,
    pub digit: u8,
    pub variant: usize,
    pub position: usize,
    pub n_positions: usize,
}

impl SamplePlan {
    fn new(split: Split, digit: u8, variant: usize, position: usize, n_positions: usize) -> Self {
        Self {
            id: format!("{}-d{digit}-v{variant:02}-p{position:02}", split.as_str()),
            split,
            digit,
            variant,
            position,
            n_positions,
        }
    }
}
