import { describe, expect, it } from "vitest";
import { buildJointModel, computeLayout } from "../src/jointplot.js";
import type { LayerToggles } from "../src/state.js";
import type { PlotPayload } from "../src/types.js";

const toggles: LayerToggles = {
  scatter: true,
  marginals: true,
  subMarginals: true,
  conditional: false,
  selectionOverlay: true,
};

function payload(extra: Partial<PlotPayload>): PlotPayload {
  return {
    x: "f",
    y: "g",
    requested_mode: extra.served_as ?? "hist2d",
    served_as: "hist2d",
    zooming: false,
    x_range: [0, 1],
    y_range: [0, 10],
    background: {
      scatter: [[0.1, 1], [0.9, 9]],
      x_hist: { lo: 0, hi: 1, counts: [1, 4, 2] },
      y_hist: { lo: 0, hi: 10, counts: [2, 2, 6] },
      n: 100,
    },
    ...extra,
  };
}

describe("buildJointModel", () => {
  it("renders a CDF layer that is monotone and ends at 1", () => {
    const cdf = [
      [0.1, 0.2, 0.4],
      [0.2, 0.5, 0.7],
      [0.3, 0.8, 1.0],
    ];
    const model = buildJointModel(payload({ served_as: "cdf", cdf }), toggles);
    expect(model.kind).toBe("cdf");
    const corner = model.heat.find((c) => c.x1 === 1 && c.y1 === 10);
    expect(corner?.v).toBe(1.0);
    // intensities along the last row/column never decrease
    const lastCol = model.heat.filter((c) => c.x1 === 1).sort((a, b) => a.y0 - b.y0);
    for (let i = 1; i < lastCol.length; i++) {
      expect(lastCol[i].v).toBeGreaterThanOrEqual(lastCol[i - 1].v);
    }
  });

  it("leaves empty histogram bins as gaps, not zero cells", () => {
    const counts = [
      [0, 3],
      [2, 0],
    ];
    const model = buildJointModel(payload({ counts }), toggles);
    expect(model.heat).toHaveLength(2);
    expect(model.heat.every((c) => c.v > 0)).toBe(true);
  });

  it("breaks the conditional curve at missing bins", () => {
    const model = buildJointModel(
      payload({
        served_as: "conditional1d",
        means: [1, 2, null, 4, 5],
        stds: [0.1, 0.1, null, 0.2, 0.2],
        bins: 5,
      }),
      toggles,
    );
    const meanLines = model.curves.filter((c) => c.role === "mean");
    expect(meanLines).toHaveLength(2); // split around the gap
    const upper = model.curves.filter((c) => c.role === "upper");
    const lower = model.curves.filter((c) => c.role === "lower");
    expect(upper[0].points[0][1]).toBeCloseTo(1.1);
    expect(lower[0].points[0][1]).toBeCloseTo(0.9);
  });

  it("turns mixture components into 1 and 2 sigma ellipses", () => {
    const model = buildJointModel(
      payload({
        served_as: "gmm",
        weights: [1],
        covs: [[[4, 0], [0, 1]]],
        ...( { means: [[0.5, 5]] } as Partial<PlotPayload> ),
      }),
      toggles,
    );
    expect(model.ellipses).toHaveLength(2);
    expect(model.ellipses[0].rx).toBeCloseTo(2); // sqrt(4)
    expect(model.ellipses[0].ry).toBeCloseTo(1);
    expect(model.ellipses[1].rx).toBeCloseTo(4); // 2 sigma
  });

  it("marginal arrows track the zoomed view window", () => {
    const model = buildJointModel(payload({ counts: [[1]] }), toggles, [0.25, 0.75], null);
    const arrows = model.xMarginal?.arrows ?? [];
    expect(arrows.map((a) => a.at)).toEqual([0.25, 0.75]);
    // y axis not zoomed: arrows sit at the full range
    expect(model.yMarginal?.arrows.map((a) => a.at)).toEqual([0, 1]);
  });

  it("computes sub-marginal heat strips from the foreground histogram", () => {
    const counts = [
      [1, 0],
      [3, 0],
    ];
    const model = buildJointModel(payload({ counts }), toggles);
    expect(model.xMarginal?.subHeat).toEqual([1 / 3, 1]);
    expect(model.yMarginal?.subHeat).toEqual([1, 0]);
  });

  it("omits marginals when toggled off", () => {
    const model = buildJointModel(payload({ counts: [[1]] }), {
      ...toggles,
      marginals: false,
    });
    expect(model.xMarginal).toBeNull();
  });

  it("drops the background scatter when its layer is off", () => {
    const on = buildJointModel(payload({ counts: [[1]] }), toggles);
    const off = buildJointModel(payload({ counts: [[1]] }), { ...toggles, scatter: false });
    expect(on.backgroundScatter.length).toBe(2);
    expect(off.backgroundScatter.length).toBe(0);
  });
});

describe("computeLayout", () => {
  it("reserves marginal strips only when enabled", () => {
    const with_ = computeLayout(600, 500, true);
    const without = computeLayout(600, 500, false);
    expect(with_.joint.w).toBeLessThan(600);
    expect(with_.xStrip.h).toBeGreaterThan(0);
    expect(without.joint.w).toBe(600);
    expect(without.xStrip.h).toBe(0);
  });
});
