"""Matplotlib quality-report figures for the stats pipeline."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .imaging import ImageBuffer, QualityReport, overlay_boundaries
from .segmentation import LabelMap


def quality_figure(original: ImageBuffer, recon: ImageBuffer,
                   labels: LabelMap, report: QualityReport):
    """Four-panel comparison figure: inputs, squared error, boundaries."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 9))
    for ax in axes.ravel():
        ax.set_xticks(())
        ax.set_yticks(())
    axes[0, 0].imshow(original.data)
    axes[0, 0].set_title("original")
    axes[0, 1].imshow(recon.data)
    axes[0, 1].set_title("reconstruction")
    err = np.mean((original.data - recon.data) ** 2, axis=2)
    im = axes[1, 0].imshow(err, cmap="viridis")
    axes[1, 0].set_title("per-pixel squared error")
    fig.colorbar(im, ax=axes[1, 0], fraction=0.046)
    axes[1, 1].imshow(overlay_boundaries(original, labels).data)
    axes[1, 1].set_title(f"boundaries ({labels.region_count} regions)")
    fig.suptitle(report.as_line(), fontsize=10)
    fig.tight_layout()
    return fig


def save_quality_figure(path: str, original: ImageBuffer, recon: ImageBuffer,
                        labels: LabelMap, report: QualityReport) -> None:
    """Render the quality figure to an image file."""
    fig = quality_figure(original, recon, labels, report)
    try:
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
