use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, TrainError};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingCurve {
    /// Mean batch loss per optimizer step.
    pub iteration_loss: Vec<f32>,
    /// Item-weighted mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// `(epoch, accuracy)` with 1-based epochs.
    pub val_accuracy: Vec<(usize, f64)>,
}

impl TrainingCurve {
    pub fn epochs(&self) -> usize {
        self.epoch_loss.len()
    }

    pub fn val_at(&self, epoch: usize) -> Option<f64> {
        self.val_accuracy.iter().find(|&&(e, _)| e == epoch).map(|&(_, a)| a)
    }

    /// First recorded epoch whose validation accuracy reaches `target`.
    pub fn first_epoch_reaching(&self, target: f64) -> Option<usize> {
        self.val_accuracy.iter().find(|&&(_, a)| a >= target).map(|&(e, _)| e)
    }

    pub fn loss_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in self.iteration_loss.iter().enumerate() {
            s.push_str(&format!("{},{l}\n", i + 1));
        }
        s
    }

    pub fn val_csv(&self) -> String {
        let mut s = String::from("epoch,val_accuracy\n");
        for (e, a) in &self.val_accuracy {
            s.push_str(&format!("{e},{a}\n"));
        }
        s
    }

    /// Writes `<stem>_loss.csv` and `<stem>_val.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> Result<()> {
        for (suffix, body) in [("loss", self.loss_csv()), ("val", self.val_csv())] {
            let path = dir.join(format!("{stem}_{suffix}.csv"));
            let io = |source| TrainError::Io {
                path: path.display().to_string(),
                source,
            };
            fs::File::create(&path).and_then(|mut f| f.write_all(body.as_bytes())).map_err(io)?;
        }
        Ok(())
    }

    /// Parses the two CSV bodies written by [`TrainingCurve::write_csv`].
    pub fn from_csv(loss: &str, val: &str) -> Option<TrainingCurve> {
        let rows = |text: &str, header: &str| -> Option<Vec<(String, String)>> {
            let mut lines = text.lines();
            (lines.next()? == header).then_some(())?;
            lines.map(|l| l.split_once(',').map(|(a, b)| (a.to_string(), b.to_string()))).collect()
        };
        let iteration_loss = rows(loss, "iteration,loss")?.into_iter().map(|(_, l)| l.parse().ok()).collect::<Option<_>>()?;
        let val_accuracy = rows(val, "epoch,val_accuracy")?
            .into_iter()
            .map(|(e, a)| Some((e.parse().ok()?, a.parse().ok()?)))
            .collect::<Option<_>>()?;
        Some(TrainingCurve {
            iteration_loss,
            epoch_loss: Vec::new(),
            val_accuracy,
        })
    }
}
