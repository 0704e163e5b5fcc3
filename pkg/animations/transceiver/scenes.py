"""
TRANSCEIVER - How an 868/915 MHz BPSK radio moves bits
======================================================

Walks through the transmit chain and the receiver's view of it using
waveforms and measurements produced by the phy868 package itself.

Runtime: ~2 minutes
"""

from manim import *
import numpy as np
import sys
import os

# Add parent directory to path to import common module
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from common import *

from phy868.harness.metrics import coherent_bpsk_ber, dbpsk_mfb
from phy868.spreading import diff_encode


class ChipMapping(Scene):
    """
    Spreading (0:00 - 0:30)
    Each bit becomes one of two complementary 15-chip codes.
    """

    def construct(self):
        self.camera.background_color = SYNTH_BG

        title = Text("Direct Sequence Spreading", font_size=38, color=SYNTH_CYAN)
        title.to_edge(UP)
        self.play(Write(title))
        self.wait(0.3)

        rows = VGroup()
        for bit in (0, 1):
            label = Text(f"bit {bit}", font_size=24, color=SYNTH_PEACH)
            chips = chip_row(code_string(bit))
            rows.add(VGroup(label, chips).arrange(RIGHT, buff=0.5))
        rows.arrange(DOWN, buff=0.6, aligned_edge=LEFT).shift(UP * 0.8)

        for row in rows:
            self.play(
                FadeIn(row[0], shift=RIGHT),
                LaggedStart(*[GrowFromCenter(s) for s in row[1]], lag_ratio=0.05),
                run_time=1.2
            )
        self.wait(0.5)

        note = Text("one code is the complement of the other", font_size=20, color=SYNTH_GOLD)
        note.next_to(rows, DOWN, buff=0.5)
        self.play(FadeIn(note, shift=UP))
        self.wait(1)

        # Differential encoding ahead of the spreader
        bits = [0, 1, 1, 0, 1]
        encoded = diff_encode(bits)
        table = VGroup(
            Text("data     " + "  ".join(map(str, bits)), font="Monospace", font_size=22, color=SYNTH_GREEN),
            Text("encoded  " + "  ".join(map(str, encoded)), font="Monospace", font_size=22, color=SYNTH_ORANGE),
        ).arrange(DOWN, aligned_edge=LEFT, buff=0.25)
        table.to_edge(DOWN).shift(UP * 0.4)

        self.play(Write(table[0]))
        self.play(TransformFromCopy(table[0], table[1]), run_time=1.2)
        self.wait(2)

        self.play(*[FadeOut(mob) for mob in self.mobjects], run_time=0.8)


class TransmitSpectrum(Scene):
    """
    On the air (0:30 - 1:00)
    Root raised cosine shaping keeps the signal inside its channel.
    """

    def construct(self):
        self.camera.background_color = SYNTH_BG

        title = Text("Transmit Spectrum", font_size=38, color=SYNTH_ORANGE)
        title.to_edge(UP)
        self.play(Write(title))

        freq, power, band = spectrum_points()
        mhz = freq / 1e6
        axes = Axes(
            x_range=[0.8, 2.2, 0.2],
            y_range=[-60, 5, 10],
            x_length=10,
            y_length=5,
            axis_config={"color": SYNTH_CYAN, "include_numbers": True, "font_size": 18},
            tips=False,
        ).shift(DOWN * 0.4)
        x_label = Text("MHz", font_size=18, color=SYNTH_CYAN).next_to(axes.x_axis, DOWN, buff=0.4)
        y_label = Text("dB", font_size=18, color=SYNTH_CYAN).next_to(axes.y_axis, UP, buff=0.2)

        keep = (mhz >= 0.8) & (mhz <= 2.2)
        trace = VMobject(color=SYNTH_GREEN, stroke_width=2)
        trace.set_points_as_corners([axes.c2p(f, max(p, -60)) for f, p in zip(mhz[keep], power[keep])])

        self.play(Create(axes), FadeIn(x_label), FadeIn(y_label), run_time=1)
        self.play(Create(trace), run_time=2)

        edges = VGroup(*[
            DashedLine(axes.c2p(f / 1e6, -60), axes.c2p(f / 1e6, 0), color=SYNTH_GOLD)
            for f in (band.low, band.high)
        ])
        width = Text(f"-20 dB width {band.width / 1e3:.0f} kHz", font_size=20, color=SYNTH_GOLD)
        width.next_to(axes, UP, buff=0.1)
        self.play(Create(edges), Write(width))
        self.wait(2)

        self.play(*[FadeOut(mob) for mob in self.mobjects], run_time=0.8)


class ReceiverConstellation(Scene):
    """
    Carrier and timing recovery (1:00 - 1:30)
    Soft chips collapse onto two points as the noise drops.
    """

    def construct(self):
        self.camera.background_color = SYNTH_BG

        title = Text("After Costas + Mueller-Muller", font_size=34, color=SYNTH_CYAN)
        title.to_edge(UP)
        self.play(Write(title))

        plane = NumberPlane(
            x_range=[-2, 2, 1],
            y_range=[-2, 2, 1],
            x_length=5.5,
            y_length=5.5,
            background_line_style={"stroke_color": SYNTH_PURPLE, "stroke_width": 1},
        ).shift(DOWN * 0.4)
        self.play(Create(plane), run_time=0.8)

        def cloud(points, color):
            return VGroup(*[
                Dot(plane.c2p(np.clip(p.real, -2, 2), np.clip(p.imag, -2, 2)), radius=0.03, color=color)
                for p in points
            ])

        stages = ((0.0, SYNTH_PEACH), (10.0, SYNTH_ORANGE), (25.0, SYNTH_GREEN))
        dots = label = None
        for snr, color in stages:
            new_dots = cloud(constellation_points(snr), color)
            new_label = Text(f"SNR {snr:.0f} dB", font_size=22, color=color).to_corner(UR)
            if dots is None:
                dots, label = new_dots, new_label
                self.play(LaggedStart(*[FadeIn(d) for d in dots], lag_ratio=0.002), FadeIn(label), run_time=1.5)
            else:
                self.play(Transform(dots, new_dots), Transform(label, new_label), run_time=1.5)
            self.wait(1)

        self.play(*[FadeOut(mob) for mob in self.mobjects], run_time=0.8)


class BerCurve(Scene):
    """
    Error rate (1:30 - 2:00)
    Theory curves, plus measured points when a loopback CSV is given
    through the PHY868_BER_CSV environment variable.
    """

    def construct(self):
        self.camera.background_color = SYNTH_BG

        title = Text("Bit Error Rate", font_size=38, color=SYNTH_ORANGE)
        title.to_edge(UP)
        self.play(Write(title))

        axes = Axes(
            x_range=[0, 12, 2],
            y_range=[-6, 0, 1],
            x_length=9,
            y_length=5,
            axis_config={"color": SYNTH_CYAN, "include_numbers": True, "font_size": 18},
            tips=False,
        ).shift(DOWN * 0.4)
        x_label = Text("Eb/N0 (dB)", font_size=18, color=SYNTH_CYAN).next_to(axes.x_axis, DOWN, buff=0.4)
        y_label = Text("log10 BER", font_size=18, color=SYNTH_CYAN).next_to(axes.y_axis, UP, buff=0.2)
        self.play(Create(axes), FadeIn(x_label), FadeIn(y_label))

        bound = axes.plot(lambda x: max(np.log10(dbpsk_mfb(x)), -6), x_range=[0, 12], color=SYNTH_PEACH)
        coherent = axes.plot(lambda x: max(np.log10(coherent_bpsk_ber(x)), -6), x_range=[0, 12], color=SYNTH_GREEN)
        legend = VGroup(
            Text("D-BPSK bound", font_size=18, color=SYNTH_PEACH),
            Text("coherent BPSK", font_size=18, color=SYNTH_GREEN),
        ).arrange(DOWN, aligned_edge=LEFT).to_corner(UR).shift(DOWN * 0.8)
        self.play(Create(bound), Create(coherent), FadeIn(legend), run_time=2)

        path = os.environ.get("PHY868_BER_CSV")
        if path and os.path.exists(path):
            ebn0, ber = ber_curve(path)
            keep = (ebn0 >= 0) & (ebn0 <= 12) & (ber >= 1e-6)
            dots = VGroup(*[
                Dot(axes.c2p(e, np.log10(b)), radius=0.06, color=SYNTH_GOLD)
                for e, b in zip(ebn0[keep], ber[keep])
            ])
            legend_measured = Text("measured", font_size=18, color=SYNTH_GOLD).next_to(legend, DOWN, aligned_edge=LEFT)
            self.play(LaggedStart(*[GrowFromCenter(d) for d in dots], lag_ratio=0.1), FadeIn(legend_measured))
        self.wait(2)

        self.play(*[FadeOut(mob) for mob in self.mobjects], run_time=0.8)
