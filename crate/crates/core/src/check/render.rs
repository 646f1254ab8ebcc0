use std::fmt::Write as _;

use crate::data::{GroupLabel, Level};
use crate::glm::WaldInterval;

use super::{report_subgroups, AssumptionReport, HorizonCheck};

pub const ASSUMPTION_LEGEND: &str = "\
Assumptions
  (1) participants alone are representative of everyone invited
  (2) given background variables, participants and non-participants have
      the same distribution of health indicators
  (3) given background variables, re-contact respondents have the same
      distribution of health indicators as the remaining non-participants
  A count-model group indicator whose 95% interval excludes 0 is read as
  evidence against the assumption it probes: participant for (2),
  re-contact for (3).
";

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "supported",
        Some(false) => "violated",
        None => "not evaluated",
    }
}

fn interval(w: &WaldInterval) -> String {
    format!("{:7.3} ({:.3},{:.3})", w.estimate, w.low, w.high)
}

fn render_horizon(out: &mut String, c: &HorizonCheck) {
    let _ = writeln!(out, "Horizon {}", c.horizon);
    match (&c.fit, &c.failure) {
        (Some(fit), _) => {
            let _ = writeln!(out, "  count model");
            for name in &fit.count_names {
                if let Some(w) = fit.count_interval(name) {
                    let _ = writeln!(out, "    {:<26}{}", name, interval(&w));
                }
            }
            let _ = writeln!(out, "  zero model");
            for name in &fit.zero_names {
                if let Some(w) = fit.zero_interval(name) {
                    let _ = writeln!(out, "    {:<26}{}", name, interval(&w));
                }
            }
            let _ = writeln!(out, "    {:<26}{:7.3}", "theta", fit.dispersion);
            let _ = writeln!(out, "    {:<26}{:.3}", "log-likelihood", fit.log_likelihood);
            if !fit.converged {
                let _ = writeln!(out, "  note: fit did not meet the convergence tolerance");
            }
        }
        (None, Some(f)) => {
            let _ = writeln!(out, "  fit failed: {f}");
        }
        (None, None) => {}
    }
    let _ = writeln!(out, "  assumption (2): {}", verdict(c.assumption2_supported));
    let _ = writeln!(out, "  assumption (3): {}", verdict(c.assumption3_supported));
    out.push('\n');
}

pub fn render_assumption_text(r: &AssumptionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Hospitalization checks");
    let _ = writeln!(
        out,
        "n = {} ({} {}, {} {}, {} {})",
        r.n,
        r.group_counts[0],
        GroupLabel::Participant.short(),
        r.group_counts[1],
        GroupLabel::RecontactRespondent.short(),
        r.group_counts[2],
        GroupLabel::NonParticipant.short(),
    );
    if r.small_sample {
        let _ = writeln!(
            out,
            "warning: small sample ({} rows); intervals are wide and verdicts fragile",
            r.n
        );
    }
    out.push('\n');
    for c in &r.horizons {
        render_horizon(&mut out, c);
    }
    let _ = writeln!(out, "Observed hospitalizations per 1000");
    let _ = write!(out, "  {:<8}{:<18}", "horizon", "group");
    for sg in report_subgroups() {
        let _ = write!(out, "{:<26}", sg.label());
    }
    out.push('\n');
    let mut seen = Vec::new();
    for o in &r.observed {
        if seen.contains(&(o.horizon, o.source.clone())) {
            continue;
        }
        seen.push((o.horizon, o.source.clone()));
        let _ = write!(out, "  {:<8}{:<18}", o.horizon.name(), o.source);
        for sg in report_subgroups() {
            let cell = r
                .observed
                .iter()
                .find(|x| x.horizon == o.horizon && x.source == o.source && x.subgroup == sg)
                .and_then(|x| x.estimate)
                .map_or_else(|| "--".to_string(), |e| e.format(0));
            let _ = write!(out, "{cell:<26}");
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(ASSUMPTION_LEGEND);
    let mut trimmed: String = out.lines().map(|l| l.trim_end()).collect::<Vec<_>>().join("\n");
    trimmed.push('\n');
    trimmed
}
