"""Recurrent control predictor trained on sliding-window optimal controls."""
