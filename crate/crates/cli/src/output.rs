use std::io::{self, Write};
use std::path::Path;

use attributor_core::corpus::Keyword;
use attributor_core::service::{AttributionResult, ComparisonResult, PointEntry, TokenRow};
use serde::Serialize;

pub fn token_table(out: &mut impl Write, tokens: &[TokenRow]) -> io::Result<()> {
    writeln!(out, "index\ttoken")?;
    for row in tokens {
        writeln!(out, "{}\t{}", row.index, row.token)?;
    }
    Ok(())
}

fn entries(out: &mut impl Write, label: &str, entries: &[PointEntry]) -> io::Result<()> {
    writeln!(out, "{label}:")?;
    for e in entries {
        writeln!(out, "  #{:<6} {:>+13.6e}  {}", e.example_id, e.score, e.snippet)?;
    }
    Ok(())
}

fn keyword_line(out: &mut impl Write, label: &str, keywords: &[Keyword]) -> io::Result<()> {
    let terms: Vec<&str> = keywords.iter().map(|k| k.term.as_str()).collect();
    writeln!(out, "{label} keywords: {}", terms.join(", "))
}

pub fn attribution(out: &mut impl Write, r: &AttributionResult) -> io::Result<()> {
    writeln!(
        out,
        "{} over {} examples; tokens {:?}: {}",
        r.method,
        r.n_examples,
        r.selected_token_indices,
        r.selected_tokens.join(" ")
    )?;
    entries(out, "most positive", &r.positive)?;
    entries(out, "most negative", &r.negative)?;
    keyword_line(out, "positive", &r.positive_keywords)?;
    keyword_line(out, "negative", &r.negative_keywords)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn comparison(out: &mut impl Write, c: &ComparisonResult) -> io::Result<()> {
    for side in [&c.generated, &c.edited] {
        writeln!(
            out,
            "== {} (mean score {:+.6e}) ==",
            side.side.as_deref().unwrap_or("?"),
            mean(&side.scores)
        )?;
        attribution(out, side)?;
    }
    Ok(())
}

/// Write pretty JSON to `path`, or to stdout when `path` is `-`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if path == Path::new("-") {
        io::stdout().write_all(text.as_bytes())?;
    } else {
        std::fs::write(path, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
    }
    Ok(())
}
