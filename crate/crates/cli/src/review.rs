//! The line-based review dialog. Each prediction is confirmed, relabeled
//! from the food list or removed; then missed foods can be added with a pin.
//!
//! Answers are read one line at a time, so the same dialog runs from a
//! terminal or from an answers file.

use std::io::{BufRead, Write};

use foodrec_core::api::ReviewRequest;
use foodrec_core::{
    Addition, FoodDatabase, FoodItem, PinLocation, PredictedFood, Verdict, VerdictEntry,
};

use crate::error::CliError;

pub const MENU_SIZE: usize = 25;

pub struct Dialog<'a> {
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
}

impl<'a> Dialog<'a> {
    pub fn new(input: &'a mut dyn BufRead, out: &'a mut dyn Write) -> Self {
        Self { input, out }
    }

    fn say(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}")?;
        Ok(())
    }

    /// `None` at end of input.
    fn ask(&mut self, prompt: &str) -> Result<Option<String>, CliError> {
        write!(self.out, "{prompt}")?;
        self.out.flush()?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            writeln!(self.out)?;
            return Ok(None);
        }
        let answer = line.trim().to_owned();
        // Echo so transcripts of scripted runs show the answers.
        writeln!(self.out, "{answer}")?;
        Ok(Some(answer))
    }

    fn require(&mut self, prompt: &str) -> Result<String, CliError> {
        self.ask(prompt)?
            .ok_or_else(|| CliError::Usage("answers ended before the review was complete".into()))
    }

    fn choose_food(&mut self, foods: &FoodDatabase) -> Result<FoodItem, CliError> {
        loop {
            let query = self.require("search food list (blank lists all): ")?;
            let matches: Vec<&FoodItem> = if query.is_empty() {
                foods.items().iter().take(MENU_SIZE).collect()
            } else {
                foods.search(&query).into_iter().take(MENU_SIZE).collect()
            };
            if matches.is_empty() {
                self.say("  no matching foods")?;
                continue;
            }
            for (i, item) in matches.iter().enumerate() {
                self.say(&format!(
                    "  {:>2}. {} ({})",
                    i + 1,
                    item.name,
                    item.code.as_str()
                ))?;
            }
            loop {
                let pick = self.require("number (blank to search again): ")?;
                if pick.is_empty() {
                    break;
                }
                match pick.parse::<usize>() {
                    Ok(n) if (1..=matches.len()).contains(&n) => return Ok(matches[n - 1].clone()),
                    _ => self.say(&format!("  pick a number from 1 to {}", matches.len()))?,
                }
            }
        }
    }

    /// Walks through the predictions and any additions and returns the
    /// assembled review.
    pub fn run(
        &mut self,
        predictions: &[PredictedFood],
        foods: &FoodDatabase,
    ) -> Result<ReviewRequest, CliError> {
        let mut verdicts = Vec::with_capacity(predictions.len());
        for p in predictions {
            self.say(&format!(
                "{}: {} at ({}, {}), confidence {:.2}",
                p.prediction_id, p.label, p.pin.x_px, p.pin.y_px, p.confidence
            ))?;
            let verdict = loop {
                let answer = self.require("  confirm (c), relabel (r) or remove (x)? ")?;
                match answer.to_ascii_lowercase().as_str() {
                    "c" | "confirm" | "y" | "yes" => break Verdict::Confirmed,
                    "x" | "remove" | "d" | "delete" => break Verdict::Removed,
                    "r" | "relabel" if foods.is_empty() => {
                        self.say("  the food list is empty; relabeling is not possible")?
                    }
                    "r" | "relabel" => {
                        let item = self.choose_food(foods)?;
                        break Verdict::Relabeled { label: item.name };
                    }
                    _ => self.say("  please answer c, r or x")?,
                }
            };
            verdicts.push(VerdictEntry {
                prediction_id: p.prediction_id.clone(),
                verdict,
            });
        }

        let mut additions = Vec::new();
        while !foods.is_empty() {
            match self.ask("add a food that is missing? (y/N) ")? {
                Some(a) if matches!(a.to_ascii_lowercase().as_str(), "y" | "yes") => {}
                _ => break,
            }
            let item = self.choose_food(foods)?;
            let pin = loop {
                let text = self.require("  pin position x,y in pixels: ")?;
                match parse_pin(&text) {
                    Some(pin) => break pin,
                    None => self.say("  enter two integers separated by a comma, like 120,80")?,
                }
            };
            additions.push(Addition {
                label: item.name,
                pin,
            });
        }
        Ok(ReviewRequest {
            verdicts,
            additions,
            submitted_at: None,
        })
    }
}

pub fn parse_pin(text: &str) -> Option<PinLocation> {
    let (x, y) = text.split_once(',')?;
    Some(PinLocation::new(
        x.trim().parse().ok()?,
        y.trim().parse().ok()?,
    ))
}

/// One line per verdict and addition, in submission order.
pub fn transcript(review: &ReviewRequest) -> Vec<String> {
    let mut lines: Vec<String> = review
        .verdicts
        .iter()
        .map(|v| match &v.verdict {
            Verdict::Confirmed => format!("verdict {} confirmed", v.prediction_id),
            Verdict::Relabeled { label } => {
                format!("verdict {} relabeled {label}", v.prediction_id)
            }
            Verdict::Removed => format!("verdict {} removed", v.prediction_id),
        })
        .collect();
    lines.extend(
        review
            .additions
            .iter()
            .map(|a| format!("added {} at {},{}", a.label, a.pin.x_px, a.pin.y_px)),
    );
    lines
}
