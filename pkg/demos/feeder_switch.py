"""Voltage regulation on a synthetic feeder after the slack bus moves.

The sensitivity model is fitted on the original feeder and then used, unchanged,
after the point of common coupling moves to another bus.

    python demos/feeder_switch.py
"""

from robustfo.experiments import grid_case

result = grid_case()
s = result.summary
print(f"fit error before switch {s['fit_error_pre']:.4f}, after {s['fit_error_post']:.4f}")
print(f"uncontrolled voltages after switch: {s['uncontrolled_post'][0]:.3f} .. "
      f"{s['uncontrolled_post'][1]:.3f} p.u.")
print("controller   violating steps   v range            curtailment   sum|q|   zero q")
for name, row in s["controllers"].items():
    print(f"{name:10s}   {row['violations']:15d}   {row['v_min']:.3f} .. {row['v_max']:.3f}"
          f"   {row['curtailment']:11.3f}   {row['abs_q']:6.2f}   {row['zero_q']:6d}")
