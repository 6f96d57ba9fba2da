w = input().split()
print(' '.join(w))
