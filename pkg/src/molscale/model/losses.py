"""The three pretraining losses and their sum."""

from dataclasses import dataclass, field
from typing import Optional

from molscale.diffcore import Tensor, add, cross_entropy, l1_loss, pairwise_distance
from molscale.errors import NoMaskedAtomsError
from molscale.model.batch import Batch
from molscale.model.noising import IGNORE_INDEX


@dataclass
class LossBundle:
    """Scalar losses of one evaluation.

    ``loss_total`` is the float sum ``loss_atom + loss_coor + loss_distance``
    in that order; ``tensor`` is the differentiable total when recorded.
    """

    loss_atom: float
    loss_coor: float
    loss_distance: float
    loss_total: float
    tensor: Optional[Tensor] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_components(
        cls, loss_atom: float, loss_coor: float, loss_distance: float, tensor: Optional[Tensor] = None
    ) -> "LossBundle":
        return cls(loss_atom, loss_coor, loss_distance, loss_atom + loss_coor + loss_distance, tensor)

    def as_dict(self) -> dict[str, float]:
        return {
            "loss_total": self.loss_total,
            "loss_atom": self.loss_atom,
            "loss_coor": self.loss_coor,
            "loss_distance": self.loss_distance,
        }


def compute_losses(logits: Tensor, r_pcoor: Tensor, batch: Batch) -> LossBundle:
    if not (batch.atom_targets != IGNORE_INDEX).any():
        raise NoMaskedAtomsError(f"batch {batch.mol_ids[:3]} has no masked atoms")
    loss_atom = cross_entropy(logits, batch.atom_targets, ignore_index=IGNORE_INDEX)
    loss_coor = l1_loss(r_pcoor, batch.coords.astype(r_pcoor.dtype), batch.atom_mask[..., None])
    if batch.distance_mask.any():
        loss_distance = l1_loss(
            pairwise_distance(r_pcoor), batch.distances.astype(r_pcoor.dtype), batch.distance_mask
        )
    else:
        # single-atom molecules only
        loss_distance = Tensor(0.0, dtype=r_pcoor.dtype.type)
    total = add(add(loss_atom, loss_coor), loss_distance)
    return LossBundle.from_components(loss_atom.item(), loss_coor.item(), loss_distance.item(), total)
