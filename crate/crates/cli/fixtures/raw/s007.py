x = input().split()
print(int(x[0]) * int(x[2]))
