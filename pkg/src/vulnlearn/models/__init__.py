"""Binary vulnerability classifiers: random forest, SVM and a 1-D ResNet."""
from .base import ModelKind, Prediction, TrainedModel, load_model, predict, save_model
from .forest import RandomForestModel, train_random_forest
from .resnet import ResNet1D, ResNetModel, train_resnet
from .svm import Kernel, SVMModel, train_svm

__all__ = [
    "Kernel", "ModelKind", "Prediction", "RandomForestModel", "ResNet1D", "ResNetModel",
    "SVMModel", "TrainedModel", "load_model", "predict", "save_model", "train_random_forest",
    "train_resnet", "train_svm",
]
