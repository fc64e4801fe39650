"""Report models for costs, evaluation rows and probes."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from kernel_estimation.utils.errors import ContractError


class LayerCost(BaseModel):
    """Cost of one convolution."""
    name: str = Field(..., description="Parameter-name prefix of the layer")
    kind: str = Field(..., description="conv2d or conv_transpose2d")
    parameters: int = Field(default=0, ge=0, description="Weights (and biases when requested)")
    flops: int = Field(default=0, ge=0, description="Multiply-accumulates at the reported extent")


class CostReport(BaseModel):
    """Totals with a per-layer breakdown; totals always equal the sum of layers."""
    parameters: int = Field(default=0, ge=0, description="Total parameters")
    flops: int = Field(default=0, ge=0, description="Total multiply-accumulates")
    extent: Optional[Tuple[int, int]] = Field(default=None, description="(H_f, W_f) used for FLOPs")
    include_bias: bool = Field(default=False, description="Whether biases were counted")
    layers: List[LayerCost] = Field(default_factory=list, description="Per-layer entries")

    @model_validator(mode="after")
    def validate_totals(self) -> "CostReport":
        if self.layers:
            if self.parameters != sum(layer.parameters for layer in self.layers):
                raise ContractError("parameter total differs from the layer sum")
            if self.flops != sum(layer.flops for layer in self.layers):
                raise ContractError("FLOP total differs from the layer sum")
        return self

    @classmethod
    def from_layers(
        cls,
        layers: List[LayerCost],
        extent: Optional[Tuple[int, int]] = None,
        include_bias: bool = False,
    ) -> "CostReport":
        return cls(
            parameters=sum(layer.parameters for layer in layers),
            flops=sum(layer.flops for layer in layers),
            extent=extent,
            include_bias=include_bias,
            layers=layers,
        )


class EvaluationRow(BaseModel):
    """LR-reconstruction fidelity of one (image, degradation) pair."""
    image: str = Field(..., description="Image identifier")
    mode: str = Field(..., description="invariant or variant")
    degradation: str = Field(..., description="Kernel triple or field type")
    psnr: float = Field(..., description="LR PSNR in dB")
    ssim: float = Field(..., description="LR SSIM")

    def key_values(self) -> Dict[str, str]:
        return {
            "image": self.image,
            "mode": self.mode,
            "degradation": self.degradation,
            "psnr": f"{self.psnr:.4f}",
            "ssim": f"{self.ssim:.6f}",
        }


class EvaluationTable(BaseModel):
    """All rows of one evaluation with their means."""
    rows: List[EvaluationRow] = Field(default_factory=list)
    noise_level: float = Field(default=0.0, description="Noise added before estimation (0-255)")

    @property
    def mean_psnr(self) -> float:
        return sum(r.psnr for r in self.rows) / len(self.rows) if self.rows else 0.0

    @property
    def mean_ssim(self) -> float:
        return sum(r.ssim for r in self.rows) / len(self.rows) if self.rows else 0.0

    def render_text(self) -> str:
        """Human-readable table."""
        lines = [f"{'image':<24} {'mode':<10} {'degradation':<28} {'psnr':>9} {'ssim':>8}"]
        for row in self.rows:
            lines.append(
                f"{row.image:<24} {row.mode:<10} {row.degradation:<28} {row.psnr:9.4f} {row.ssim:8.6f}"
            )
        lines.append(f"{'mean':<24} {'':<10} {'':<28} {self.mean_psnr:9.4f} {self.mean_ssim:8.6f}")
        return "\n".join(lines)

    def render_key_values(self) -> str:
        """One ``key=value`` line per row, then the means."""
        lines = [" ".join(f"{k}={v}" for k, v in row.key_values().items()) for row in self.rows]
        lines.append(
            f"mean_psnr={self.mean_psnr:.4f} mean_ssim={self.mean_ssim:.6f} "
            f"rows={len(self.rows)} noise_level={self.noise_level:g}"
        )
        return "\n".join(lines)


class ReceptiveFieldProbe(BaseModel):
    """Input-gradient support of one interior output site."""
    height: int = Field(..., ge=0, description="Rows spanned by the support")
    width: int = Field(..., ge=0, description="Columns spanned by the support")
    analytic: Tuple[int, int] = Field(..., description="Analytic receptive field")
    contained: bool = Field(..., description="Support lies inside the analytic window")
    low_coverage: bool = Field(..., description="Support smaller than the analytic window")


class PatchProbePoint(BaseModel):
    """Fidelity of the center-pixel estimate for one structure size."""
    structure_size: int = Field(..., ge=1)
    psnr: float
    ssim: float
    untrained: bool = Field(default=False, description="Network has never been trained")
