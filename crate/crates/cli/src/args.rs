//! Shorthand parsers for distributions, disciplines and queue entries.

use txtrack_core::experiments::NamedQueue;
use txtrack_core::queue_sim::Discipline;
use txtrack_core::stochastics::DistributionSpec;

fn numbers(s: &str, want: usize, form: &str) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{v}` is not a number in `{form}`"))
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != want {
        return Err(format!(
            "`{form}` expects {want} parameter(s), got {}",
            vals.len()
        ));
    }
    Ok(vals)
}

/// `exp:RATE`, `weibull:SHAPE,SCALE`, `uniform:LOW,HIGH`, `det:VALUE`, or a
/// JSON literal such as `{"kind":"weibull","shape":1.5,"scale":1.0}`.
pub fn parse_distribution(s: &str) -> Result<DistributionSpec, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let (kind, params) = s
        .split_once(':')
        .ok_or_else(|| format!("`{s}` is not of the form KIND:PARAMS"))?;
    let spec = match kind {
        "exp" | "exponential" => DistributionSpec::exponential(numbers(params, 1, s)?[0]),
        "weibull" => {
            let v = numbers(params, 2, s)?;
            DistributionSpec::weibull(v[0], v[1])
        }
        "uniform" => {
            let v = numbers(params, 2, s)?;
            DistributionSpec::uniform(v[0], v[1])
        }
        "det" | "deterministic" => DistributionSpec::deterministic(numbers(params, 1, s)?[0]),
        other => return Err(format!("unknown distribution kind `{other}`")),
    };
    spec.map_err(|e| e.to_string())
}

pub fn parse_discipline(s: &str) -> Result<Discipline, String> {
    match s {
        "infinite-server" | "is" => Ok(Discipline::InfiniteServer),
        "processor-sharing" | "ps" => Ok(Discipline::ProcessorSharing),
        other => Err(format!(
            "unknown discipline `{other}` (expected infinite-server or processor-sharing)"
        )),
    }
}

/// `ID=ARRIVAL/SERVICE[/DISCIPLINE]`.
pub fn parse_queue(s: &str) -> Result<NamedQueue, String> {
    let (id, rest) = s
        .split_once('=')
        .ok_or_else(|| format!("queue `{s}` is not of the form ID=ARRIVAL/SERVICE"))?;
    let parts: Vec<&str> = rest.split('/').collect();
    let discipline = match parts.len() {
        2 => Discipline::InfiniteServer,
        3 => parse_discipline(parts[2])?,
        _ => {
            return Err(format!(
                "queue `{s}` is not of the form ID=ARRIVAL/SERVICE[/DISCIPLINE]"
            ))
        }
    };
    Ok(NamedQueue::new(
        id.trim(),
        parse_distribution(parts[0])?,
        parse_distribution(parts[1])?,
        discipline,
    ))
}
