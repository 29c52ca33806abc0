"""The three-sided coin and its curriculum shift.

Run: python demos/07_schedules.py
"""
from sigmae.training import Schedule

s = Schedule.unsup_then_sup(window=1000, shift_start=2000)
for step in (0, 2000, 2250, 2500, 3000, 5000):
    print(step, s.probabilities(step).round(3))

print(Schedule.joint({"supervised": 200, "x_recon": 900, "z_recon": 900}).start)
print(Schedule.joint({"supervised": 200, "x_recon": 900, "z_recon": 900}, proportional=True).start)
