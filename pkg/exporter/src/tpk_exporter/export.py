"""Embedding extraction from a LLaVA-class checkpoint.

Both modalities are taken from the language model's input space: visual
tokens are the post-projection image features (vision tower -> multimodal
projector), textual tokens are the LM input embeddings of the instruction
prompt with image placeholders removed. System/template tokens around the
user prompt are included, so the textual side is never empty. Everything is
downcast to f32 on export.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tpk import MODALITY_TEXTUAL, MODALITY_VISUAL, read_tpk_header, write_tpk

EXTRACTION_LAYER = "post-projection, pre-concatenation (LM input space)"
PROMPT_TEMPLATE = "USER: <image>\n{prompt} ASSISTANT:"


class ExportError(Exception):
    pass


class ModelLoadError(ExportError):
    pass


class ImageDecodeError(ExportError):
    pass


class UnexpectedShapeError(ExportError):
    pass


@dataclass(frozen=True)
class ExportManifest:
    model_id: str
    layer: str
    image_path: str
    prompt: str
    visual_file: str
    textual_file: str
    dims: tuple[int, int, int]  # (N visual, M textual, d)

    def to_json_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "layer": self.layer,
            "image_path": self.image_path,
            "prompt": self.prompt,
            "visual_file": self.visual_file,
            "textual_file": self.textual_file,
            "dims": list(self.dims),
        }


def _load_model(model_id: str):
    try:
        import torch
        from transformers import AutoProcessor, LlavaForConditionalGeneration

        model = LlavaForConditionalGeneration.from_pretrained(model_id)
        processor = AutoProcessor.from_pretrained(model_id)
    except ExportError:
        raise
    except Exception as exc:
        raise ModelLoadError(f"failed to load model {model_id!r}: {exc}") from exc
    model.eval()
    return model, processor


def _decode_image(image_path: str):
    from PIL import Image

    try:
        with Image.open(image_path) as img:
            return img.convert("RGB")
    except OSError as exc:
        raise ImageDecodeError(f"failed to decode image {image_path!r}: {exc}") from exc


def _projected_image_features(model, pixel_values) -> np.ndarray:
    """Vision tower + multimodal projector output for one image, (N, d).

    transformers has returned this as a plain tensor, a list of per-image
    tensors, and an output object whose pooler_output holds the projected
    features; normalize all of them.
    """
    import torch

    with torch.no_grad():
        out = model.get_image_features(pixel_values=pixel_values)
    if hasattr(out, "pooler_output"):
        out = out.pooler_output
    if isinstance(out, (list, tuple)):
        out = out[0]
    feats = torch.as_tensor(out)
    if feats.dim() == 3:
        if feats.shape[0] != 1:
            raise UnexpectedShapeError(f"expected one image, got feature batch {tuple(feats.shape)}")
        feats = feats[0]
    if feats.dim() != 2:
        raise UnexpectedShapeError(f"projected image features have shape {tuple(feats.shape)}")
    d_text = model.config.text_config.hidden_size
    if feats.shape[1] != d_text:
        raise UnexpectedShapeError(
            f"projected width {feats.shape[1]} != LM hidden size {d_text}; "
            "extraction point must be the post-projection embeddings"
        )
    return feats.to(torch.float32).cpu().numpy()


def _prompt_embeddings(model, processor, prompt: str) -> np.ndarray:
    """LM input embeddings of the templated prompt, image placeholder
    removed; (M, d) with M >= 1."""
    import torch

    text = PROMPT_TEMPLATE.format(prompt=prompt).strip()
    ids = processor.tokenizer(text, return_tensors="pt")["input_ids"][0]
    config = model.config
    image_token = getattr(config, "image_token_index", None)
    if image_token is None:
        image_token = getattr(config, "image_token_id", -1)
    kept = ids[ids != image_token]
    if kept.numel() < 1:
        raise UnexpectedShapeError("prompt tokenized to zero non-image tokens")
    with torch.no_grad():
        emb = model.get_input_embeddings()(kept.unsqueeze(0))[0]
    return emb.to(torch.float32).cpu().numpy()


def export(model_id: str, image_path: str, prompt: str, out_dir) -> ExportManifest:
    """Write visual.tpk, textual.tpk, and manifest.json into out_dir."""
    model, processor = _load_model(model_id)
    image = _decode_image(image_path)

    pixel_values = processor.image_processor(images=image, return_tensors="pt")["pixel_values"]
    visual = _projected_image_features(model, pixel_values)
    textual = _prompt_embeddings(model, processor, prompt)
    if visual.shape[1] != textual.shape[1]:
        raise UnexpectedShapeError(
            f"visual width {visual.shape[1]} != textual width {textual.shape[1]}"
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    visual_file = out_dir / "visual.tpk"
    textual_file = out_dir / "textual.tpk"
    n, d = write_tpk(visual, MODALITY_VISUAL, visual_file)
    m, _ = write_tpk(textual, MODALITY_TEXTUAL, textual_file)

    for path, want_rows in ((visual_file, n), (textual_file, m)):
        _, rows, dim = read_tpk_header(path)
        if rows != want_rows or dim != d:
            raise UnexpectedShapeError(f"{path}: header ({rows}, {dim}) != exported ({want_rows}, {d})")

    manifest = ExportManifest(
        model_id=str(model_id),
        layer=EXTRACTION_LAYER,
        image_path=str(image_path),
        prompt=prompt,
        visual_file=str(visual_file),
        textual_file=str(textual_file),
        dims=(n, m, d),
    )
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_json_dict(), indent=2) + "\n")
    return manifest
