#!/usr/bin/env python3
"""Fitting a motion clip onto a terrain-patch bank, then RBF refinement.

A procedural walk is generated on one terrain, searched against a bank
of candidate patches, and the winners are deformed so every labeled foot
contact lands exactly on the surface.
"""
import numpy as np

from terramotion import (
    default_skeleton,
    fit_error,
    forward_kinematics,
    generate_patch_bank,
    generate_terrain,
    height_at,
)
from terramotion.datagen import generate_clip
from terramotion.fitting import contact_constraints, fit_and_refine
from terramotion.heightfield import sample_patch
from terramotion.terrain_gen import PatchBankParams

sk = default_skeleton()
source = generate_terrain(42, "fractal", size=8.0, amplitude=0.12)
clip = generate_clip(7, "walk", source, (4.0, 4.0), 0.3)
pos = forward_kinematics(sk, clip.segment)
print(f"clip: 60 frames of '{clip.style_name}', "
      f"{int(clip.segment.contacts.sum())} contact labels")

bank = generate_patch_bank(99, PatchBankParams(count=60))
bank.append(sample_patch(source, (4.0, 4.0), 0.0, source_id="the_true_terrain"))

results, refined = fit_and_refine(sk, clip.segment, pos, bank, top=3)
print("\ntop-3 patches (E_fit = E_contact + E_penetration + E_jump):")
for fr in results:
    print(f"  #{fr.patch_id:3d} {fr.source_id:18s} total={fr.error_total:9.3e} "
          f"(contact={fr.error_contact:.3e}, pen={fr.error_penetration:.3e}, "
          f"jump={fr.error_jump:.3e}) offset={fr.vertical_offset:+.3f}")

print("\nrefinement: contact constraints met exactly on each winner")
for fr, patch in zip(results, refined):
    cons = contact_constraints(sk, clip.segment, pos, fr.vertical_offset)
    worst = max(
        abs(height_at(patch.field, c.location[0], c.location[1]) - c.required_height)
        for c in cons
    )
    again = fit_error(sk, clip.segment, pos, patch, fr.vertical_offset)
    print(f"  #{fr.patch_id:3d}: {len(cons)} constraints, worst residual {worst:.1e} m, "
          f"re-run E_contact={again.error_contact:.1e}")
