from pnnflow.nets.coupling import AutoencoderPair, InvertibleNet, build_inn
from pnnflow.nets.numcore import Dense, ParamSet, seeded_rng
from pnnflow.nets.pnn import FlowDataset, PnnModel, loss_alternative, loss_for, loss_primary, predict
from pnnflow.nets.sympnet import SympNet, build_sympnet
