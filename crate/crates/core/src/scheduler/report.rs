use serde::Serialize;

use super::CostReport;

/// One row of the per-layer CSV used for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCsvRow {
    pub layer: usize,
    pub kind: String,
    pub npu_share: u32,
    pub cim_share: u32,
    pub npu_ms: f64,
    pub cim_ms: f64,
    pub energy_nj: f64,
}

pub fn write_layer_csv(report: &CostReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &report.layers {
        w.serialize(LayerCsvRow {
            layer: c.layer,
            kind: c.kind.name().to_string(),
            npu_share: c.npu_share,
            cim_share: c.cim_share,
            npu_ms: c.npu_time * 1e3,
            cim_ms: c.cim_time * 1e3,
            energy_nj: c.energy(),
        })
        .expect("in-memory csv write");
    }
    // an empty report still gets its header
    if report.layers.is_empty() {
        return "layer,kind,npu_share,cim_share,npu_ms,cim_ms,energy_nj\n".to_string();
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::super::{schedule_network, Objective};
    use super::*;
    use crate::costmodel::HardwareConfig;
    use crate::netir::{LayerSpec, Network};

    #[test]
    fn csv_has_one_row_per_layer() {
        let hw = HardwareConfig::sample();
        let net = Network {
            layers: vec![
                LayerSpec::depthwise((8, 8), 16, 3, 1),
                LayerSpec::pointwise((8, 8), 16, 32),
            ],
            ..Default::default()
        };
        let (_, r) = schedule_network(&net, &hw, Objective::Latency).unwrap();
        let text = write_layer_csv(&r);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "layer,kind,npu_share,cim_share,npu_ms,cim_ms,energy_nj"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,DepthwiseConv2d,"));
        assert_eq!(
            write_layer_csv(&CostReport::from_layers(vec![]))
                .lines()
                .count(),
            1
        );
    }
}
