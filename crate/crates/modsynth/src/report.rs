//! CSV and SVG reports.

use std::io::Write;

use modsynth_core::synthesis::GenerationStats;

/// `generation,best,mean,feasible`
pub fn history_csv(history: &[GenerationStats], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "best", "mean", "feasible"])?;
    for g in history {
        w.serialize((g.generation, g.best, g.mean, g.feasible))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per waypoint: index then joint angles (rad).
pub fn path_csv(waypoints: &[Vec<f64>], times: Option<&[f64]>, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = waypoints.first().map_or(0, Vec::len);
    let mut header = vec!["waypoint".to_string()];
    if times.is_some() {
        header.push("time_s".into());
    }
    header.extend((1..=n).map(|i| format!("q{i}_rad")));
    w.write_record(&header)?;
    for (k, q) in waypoints.iter().enumerate() {
        let mut row = vec![k.to_string()];
        if let Some(t) = times {
            row.push(t[k].to_string());
        }
        row.extend(q.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `sample,joint,torque_Nm,limit_Nm`; `torques[sample][joint]`.
pub fn torque_csv(torques: &[Vec<f64>], limits: &[f64], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "joint", "torque_Nm", "limit_Nm"])?;
    for (j, row) in torques.iter().enumerate() {
        for (i, t) in row.iter().enumerate() {
            w.serialize((j, i + 1, t, limits[i]))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Torque over time per joint with dashed limit lines, as a standalone SVG.
pub fn torque_profile_svg(times: &[f64], torques: &[Vec<f64>], limits: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let t_max = times.last().copied().unwrap_or(0.0).max(1e-9);
    let y_max = limits
        .iter()
        .chain(torques.iter().flatten())
        .fold(1e-9_f64, |m, t| m.max(t.abs()))
        * 1.1;
    let x = |t: f64| PAD + (W - 2.0 * PAD) * t / t_max;
    let y = |v: f64| H / 2.0 - (H / 2.0 - PAD) * v / y_max;

    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="100%" height="100%" fill="white"/>
<line x1="{PAD}" y1="{mid}" x2="{right}" y2="{mid}" stroke="black"/>
<text x="{PAD}" y="20" font-size="12">torque (N·m) over {t_max:.2} s, axis ±{y_max:.2}</text>
"#,
        mid = y(0.0),
        right = W - PAD,
    );
    for (i, limit) in limits.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for v in [*limit, -limit] {
            svg += &format!(
                r#"<line x1="{PAD}" y1="{yy:.2}" x2="{right}" y2="{yy:.2}" stroke="{color}" stroke-dasharray="4 4"/>
"#,
                yy = y(v),
                right = W - PAD
            );
        }
        let points: Vec<String> = times
            .iter()
            .zip(torques)
            .map(|(t, row)| format!("{:.2},{:.2}", x(*t), y(row[i])))
            .collect();
        svg += &format!(
            r#"<polyline fill="none" stroke="{color}" points="{}"/>
<text x="{}" y="{}" font-size="11" fill="{color}">joint {}</text>
"#,
            points.join(" "),
            W - PAD + 4.0,
            PAD + 14.0 * i as f64,
            i + 1
        );
    }
    svg += "</svg>\n";
    svg
}
